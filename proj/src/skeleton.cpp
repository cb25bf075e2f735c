// SPDX-License-Identifier: Apache-2.0
#include "actionpose/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace actionpose {

const char* to_string(View v) { return v == View::front ? "front" : "side"; }

const char* to_string(BodyPart p) {
  switch (p) {
    case BodyPart::head: return "head";
    case BodyPart::arms: return "arms";
    case BodyPart::upper_body: return "upper_body";
    case BodyPart::hips: return "hips";
    case BodyPart::legs: return "legs";
    case BodyPart::lower_body: return "lower_body";
  }
  return "?";
}

int SkeletonLayout::joint_index(const std::string& name) const {
  for (int j = 0; j < joint_count(); ++j) {
    if (joint_names[j] == name) return j;
  }
  throw ValidationError("unknown joint name: " + name);
}

const std::vector<int>& SkeletonLayout::part_joints(const std::string& part_name) const {
  for (int p = 0; p < kNumBodyParts; ++p) {
    if (part_name == to_string(static_cast<BodyPart>(p))) return parts[p];
  }
  throw ValidationError("unknown body part: " + part_name);
}

const std::vector<int>& SkeletonLayout::part_joints(BodyPart part) const {
  return parts[static_cast<int>(part)];
}

void SkeletonLayout::validate() const {
  if (joint_count() != kNumJoints) {
    throw ValidationError("skeleton layout must have exactly 17 joints");
  }
  if (static_cast<int>(parent_of.size()) != kNumJoints) {
    throw ValidationError("parent table size mismatch");
  }
  if (parent_of[0] != -1) throw ValidationError("joint 0 (pelvis) must be the root");
  // Every non-root joint must reach the root without cycles.
  for (int j = 1; j < kNumJoints; ++j) {
    int cur = j;
    int hops = 0;
    while (cur != 0) {
      cur = parent_of[cur];
      if (cur < 0 || cur >= kNumJoints || ++hops > kNumJoints) {
        throw ValidationError("parent relation is not a tree rooted at pelvis");
      }
    }
  }
  std::set<int> covered;
  for (int p = 0; p < kNumBodyParts; ++p) {
    if (parts[p].empty()) {
      throw ValidationError(std::string("empty body part: ") + to_string(static_cast<BodyPart>(p)));
    }
    for (int j : parts[p]) {
      if (j < 0 || j >= kNumJoints) throw ValidationError("part joint index out of range");
      covered.insert(j);
    }
  }
  if (static_cast<int>(covered.size()) != kNumJoints) {
    throw ValidationError("body parts do not cover all joints");
  }
}

bool SkeletonLayout::operator==(const SkeletonLayout& other) const {
  return joint_names == other.joint_names && parent_of == other.parent_of &&
         parts == other.parts;
}

void SkeletonLayout::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write skeleton layout: " + path);
  os << "# actionpose skeleton layout v1\n";
  os << "# columns: joint_name parent_name parts (comma separated)\n";
  for (int j = 0; j < joint_count(); ++j) {
    os << joint_names[j] << ' '
       << (parent_of[j] < 0 ? std::string("-") : joint_names[parent_of[j]]) << ' ';
    bool first = true;
    for (int p = 0; p < kNumBodyParts; ++p) {
      if (std::find(parts[p].begin(), parts[p].end(), j) != parts[p].end()) {
        if (!first) os << ',';
        os << to_string(static_cast<BodyPart>(p));
        first = false;
      }
    }
    os << '\n';
  }
}

SkeletonLayout SkeletonLayout::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read skeleton layout: " + path);
  SkeletonLayout out;
  std::vector<std::string> parent_names;
  std::vector<std::string> part_specs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, parent, parts_csv;
    if (!(ls >> name >> parent >> parts_csv)) {
      throw IoError("malformed skeleton layout line: " + line);
    }
    out.joint_names.push_back(name);
    parent_names.push_back(parent);
    part_specs.push_back(parts_csv);
  }
  out.parent_of.resize(out.joint_names.size());
  for (std::size_t j = 0; j < out.joint_names.size(); ++j) {
    out.parent_of[j] = parent_names[j] == "-" ? -1 : out.joint_index(parent_names[j]);
    std::stringstream ps(part_specs[j]);
    std::string part;
    while (std::getline(ps, part, ',')) {
      for (int p = 0; p < kNumBodyParts; ++p) {
        if (part == to_string(static_cast<BodyPart>(p))) {
          out.parts[p].push_back(static_cast<int>(j));
        }
      }
    }
  }
  out.validate();
  return out;
}

std::shared_ptr<const SkeletonLayout> SkeletonLayout::h36m17() {
  static const std::shared_ptr<const SkeletonLayout> instance = [] {
    auto l = std::make_shared<SkeletonLayout>();
    l->joint_names = {"pelvis",     "r_hip",   "r_knee",     "r_ankle", "l_hip",
                      "l_knee",     "l_ankle", "spine",      "thorax",  "neck",
                      "head",       "l_shoulder", "l_elbow", "l_wrist", "r_shoulder",
                      "r_elbow",    "r_wrist"};
    l->parent_of = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    const std::vector<int> head = {9, 10};
    const std::vector<int> arms = {11, 12, 13, 14, 15, 16};
    std::vector<int> upper = {7, 8};
    upper.insert(upper.end(), head.begin(), head.end());
    upper.insert(upper.end(), arms.begin(), arms.end());
    std::sort(upper.begin(), upper.end());
    const std::vector<int> hips = {0, 1, 4};
    const std::vector<int> legs = {2, 3, 5, 6};
    std::vector<int> lower = hips;
    lower.insert(lower.end(), legs.begin(), legs.end());
    std::sort(lower.begin(), lower.end());
    l->parts = {head, arms, upper, hips, legs, lower};
    l->validate();
    return l;
  }();
  return instance;
}

void PoseSeq3D::validate() const {
  if (!layout) throw ValidationError("PoseSeq3D has no layout");
  if (frames < 2) throw ValidationError("PoseSeq3D needs at least 2 frames");
  if (data.rows() != static_cast<Eigen::Index>(frames) * joints() || data.cols() != 3) {
    throw ValidationError("PoseSeq3D tensor shape mismatch");
  }
  if (!data.allFinite()) throw ValidationError("PoseSeq3D contains non-finite entries");
}

void PoseSeq2D::validate() const {
  if (!layout) throw ValidationError("PoseSeq2D has no layout");
  if (frames < 1) throw ValidationError("PoseSeq2D is empty");
  if (data.rows() != static_cast<Eigen::Index>(frames) * joints() || data.cols() != 3) {
    throw ValidationError("PoseSeq2D tensor shape mismatch");
  }
  if (!data.allFinite()) throw ValidationError("PoseSeq2D contains non-finite entries");
}

PoseSeq2D project_orthographic(const PoseSeq3D& seq, View view) {
  if (!seq.layout) throw ValidationError("project_orthographic: sequence has no layout");
  const int joints = seq.joints();
  for (Eigen::Index r = 0; r < seq.data.rows(); ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(seq.data(r, c))) {
        const int t = static_cast<int>(r) / joints;
        const int j = static_cast<int>(r) % joints;
        throw ValidationError("project_orthographic: non-finite input at frame " +
                              std::to_string(t) + ", joint " + std::to_string(j));
      }
    }
  }
  PoseSeq2D out;
  out.layout = seq.layout;
  out.frames = seq.frames;
  out.data.resize(seq.data.rows(), 3);
  if (view == View::front) {
    out.data.col(0) = seq.data.col(0);  // x
  } else {
    out.data.col(0) = seq.data.col(2);  // z
  }
  out.data.col(1) = seq.data.col(1);  // y
  out.data.col(2).setOnes();
  return out;
}

BBox clip_bbox(const PoseSeq2D& seq) {
  seq.validate();
  const double xmin = seq.data.col(0).minCoeff();
  const double xmax = seq.data.col(0).maxCoeff();
  const double ymin = seq.data.col(1).minCoeff();
  const double ymax = seq.data.col(1).maxCoeff();
  BBox b;
  b.cx = 0.5 * (xmin + xmax);
  b.cy = 0.5 * (ymin + ymax);
  b.half = 0.5 * std::max(xmax - xmin, ymax - ymin);
  return b;
}

PoseSeq2D normalize_to_pixels(const PoseSeq2D& seq, const BBox& bbox) {
  if (!(bbox.half > 0.0)) {
    throw ValidationError("normalize_to_pixels: degenerate bounding box");
  }
  PoseSeq2D out = seq;
  const double scale = bbox.half * kBBoxMargin;
  out.data.col(0) = (seq.data.col(0).array() - bbox.cx) / scale;
  out.data.col(1) = (seq.data.col(1).array() - bbox.cy) / scale;
  out.normalized = true;
  out.norm_bbox = bbox;
  return out;
}

PoseSeq2D denormalize(const PoseSeq2D& seq) {
  if (!seq.normalized) throw ValidationError("denormalize: sequence is not normalized");
  PoseSeq2D out = seq;
  const double scale = seq.norm_bbox.half * kBBoxMargin;
  out.data.col(0) = seq.data.col(0).array() * scale + seq.norm_bbox.cx;
  out.data.col(1) = seq.data.col(1).array() * scale + seq.norm_bbox.cy;
  out.normalized = false;
  out.norm_bbox = BBox{};
  return out;
}

PoseSeq3D root_center(const PoseSeq3D& seq) {
  seq.validate();
  PoseSeq3D out = seq;
  const int joints = seq.joints();
  for (int t = 0; t < seq.frames; ++t) {
    const Eigen::RowVector3d root = seq.data.row(t * joints);
    out.data.middleRows(t * joints, joints).rowwise() -= root;
  }
  return out;
}

}  // namespace actionpose
