// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <vector>

#include "actionpose/errors.hpp"

namespace actionpose {

constexpr int kNumJoints = 17;
constexpr int kNumBodyParts = 6;
// Margin factor of the square virtual image around the tight bounding box.
constexpr double kBBoxMargin = 1.1;

enum class View { front, side };

const char* to_string(View v);

// The six anatomical groups used for part-level masking, in the fixed order
// the uniform part draw indexes into.
enum class BodyPart : int {
  head = 0,
  arms = 1,
  upper_body = 2,
  hips = 3,
  legs = 4,
  lower_body = 5,
};

const char* to_string(BodyPart p);

// 17-joint skeleton in the Human3.6M convention, pelvis root at index 0,
// plus the six-part partition table.
struct SkeletonLayout {
  std::vector<std::string> joint_names;          // size 17
  std::vector<int> parent_of;                    // -1 for the root
  std::array<std::vector<int>, kNumBodyParts> parts;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  int joint_index(const std::string& name) const;  // throws on unknown name

  // Joint set of one part; throws ValidationError on an unknown part name.
  const std::vector<int>& part_joints(const std::string& part_name) const;
  const std::vector<int>& part_joints(BodyPart part) const;

  // Checks joint count, tree rootedness, and part coverage.
  void validate() const;

  // Plain-text table: one line per joint, "name parent part,part,...".
  void save(const std::string& path) const;
  static SkeletonLayout load(const std::string& path);

  static std::shared_ptr<const SkeletonLayout> h36m17();

  bool operator==(const SkeletonLayout& other) const;
};

// Square bounding region: center and tight half-extent (before margin).
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double half = 0.0;
};

// 3D motion tensor, T x J x 3 in millimeters, stored as a (T*J) x 3 matrix
// with row index t*J + j.
struct PoseSeq3D {
  std::shared_ptr<const SkeletonLayout> layout;
  Eigen::MatrixXd data;
  int frames = 0;
  double fps = 30.0;

  int joints() const { return layout ? layout->joint_count() : 0; }
  Eigen::RowVector3d joint(int t, int j) const { return data.row(t * joints() + j); }
  void set_joint(int t, int j, const Eigen::RowVector3d& v) { data.row(t * joints() + j) = v; }

  void validate() const;  // T >= 2, finite entries, shape matches layout
};

// 2D pose tensor, T x J x 3 channels (x, y, confidence), same row layout as
// PoseSeq3D. Confidence is 0 exactly where an entry is masked.
struct PoseSeq2D {
  std::shared_ptr<const SkeletonLayout> layout;
  Eigen::MatrixXd data;
  int frames = 0;

  // Inverse of normalize_to_pixels; valid when normalized is true.
  bool normalized = false;
  BBox norm_bbox;

  int joints() const { return layout ? layout->joint_count() : 0; }
  Eigen::RowVector3d joint(int t, int j) const { return data.row(t * joints() + j); }

  void validate() const;
};

// Orthographic projection: front keeps (x, y), side keeps (z, y); the
// confidence channel is set to 1. Axes: x lateral, y vertical, z depth from
// the front camera. Non-finite input is rejected with the offending index.
PoseSeq2D project_orthographic(const PoseSeq3D& seq, View view);

// Tight square bounding box over all (x, y) of the clip.
BBox clip_bbox(const PoseSeq2D& seq);

// Affine map into [-1, 1] using a square virtual image of half-extent
// bbox.half * kBBoxMargin; the inverse map is stored on the result.
PoseSeq2D normalize_to_pixels(const PoseSeq2D& seq, const BBox& bbox);

// Inverse of normalize_to_pixels using the stored bbox metadata.
PoseSeq2D denormalize(const PoseSeq2D& seq);

// Translates every frame so the pelvis (joint 0) is exactly at the origin.
PoseSeq3D root_center(const PoseSeq3D& seq);

}  // namespace actionpose
