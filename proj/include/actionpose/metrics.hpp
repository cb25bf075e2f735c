// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "actionpose/errors.hpp"
#include "actionpose/skeleton.hpp"

namespace actionpose {

constexpr double kPckThresholdMm = 150.0;
constexpr double kAucThresholdStepMm = 5.0;  // grid 0:5:150 -> 31 thresholds

// Mean per-joint Euclidean distance in millimeters over all frames and
// joints. Inputs are expected root-centered; rows ordered (frame, joint).
double mpjpe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

// MPJPE after per-frame Procrustes alignment (rotation with det +1, uniform
// scale, translation). Degenerate frames (collinear joints) fall back to
// translation-only alignment and are counted in degenerate_frames.
double p_mpjpe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int frames,
               int joints, int* degenerate_frames = nullptr);

// The optimal similarity alignment of one frame (least squares, reflection
// excluded); exposed for the per-frame tests.
Eigen::MatrixXd procrustes_align(const Eigen::MatrixXd& pred_frame,
                                 const Eigen::MatrixXd& gt_frame,
                                 bool* degenerate = nullptr);

// Percentage of joints with error within threshold_mm.
double pck(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
           double threshold_mm = kPckThresholdMm);

// Mean of PCK over the threshold grid 0, 5, ..., 150 mm.
double auc(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt);

// Convenience overloads on pose sequences.
double mpjpe(const PoseSeq3D& pred, const PoseSeq3D& gt);
double p_mpjpe(const PoseSeq3D& pred, const PoseSeq3D& gt, int* degenerate_frames = nullptr);
double pck(const PoseSeq3D& pred, const PoseSeq3D& gt, double threshold_mm = kPckThresholdMm);
double auc(const PoseSeq3D& pred, const PoseSeq3D& gt);

struct EvalReport {
  double mpjpe_mm = 0.0;
  double p_mpjpe_mm = 0.0;
  double pck_percent = 0.0;
  double auc_percent = 0.0;

  struct Item {
    std::string clip_id;
    std::string view;
    double mpjpe_mm = 0.0;
    double p_mpjpe_mm = 0.0;
    double pck_percent = 0.0;
    double auc_percent = 0.0;
  };
  std::vector<Item> per_clip;

  // Line-oriented human-readable report.
  void write_text(std::ostream& os) const;
  // Machine-readable key-value file. Keys: mpjpe_mm, p_mpjpe_mm,
  // pck_percent, auc_percent, num_items, and per item
  // item.<clip_id>.<view>.{mpjpe_mm,p_mpjpe_mm,pck_percent,auc_percent}.
  void write_kv(std::ostream& os) const;
};

}  // namespace actionpose
