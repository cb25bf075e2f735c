// SPDX-License-Identifier: Apache-2.0
#include "actionpose/metrics.hpp"

#include <cmath>
#include <iomanip>

namespace actionpose {

namespace {

void check_shapes(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3 || pred.rows() == 0) {
    throw ValidationError("metrics: inputs must be matching non-empty (N x 3) stacks");
  }
}

}  // namespace

double mpjpe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  check_shapes(pred, gt);
  return (pred - gt).rowwise().norm().mean();
}

Eigen::MatrixXd procrustes_align(const Eigen::MatrixXd& pred_frame,
                                 const Eigen::MatrixXd& gt_frame, bool* degenerate) {
  check_shapes(pred_frame, gt_frame);
  const Eigen::RowVector3d mu_p = pred_frame.colwise().mean();
  const Eigen::RowVector3d mu_g = gt_frame.colwise().mean();
  const Eigen::MatrixXd pc = pred_frame.rowwise() - mu_p;
  const Eigen::MatrixXd gc = gt_frame.rowwise() - mu_g;

  const double pred_ss = pc.squaredNorm();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(pc.transpose() * gc,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sing = svd.singularValues();

  // Collinear point sets leave the rotation underdetermined; fall back to
  // translation-only alignment.
  const bool collinear =
      pred_ss <= 0.0 || sing(0) <= 0.0 || sing(1) / sing(0) < 1e-9;
  if (degenerate) *degenerate = collinear;
  if (collinear) {
    return pc.rowwise() + mu_g;
  }

  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((v * u.transpose()).determinant() < 0.0) d(2) = -1.0;  // exclude reflections
  const Eigen::Matrix3d rot = v * d.asDiagonal() * u.transpose();
  const double scale = sing.dot(d) / pred_ss;
  return (scale * (rot * pc.transpose())).transpose().rowwise() + mu_g;
}

double p_mpjpe(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int frames,
               int joints, int* degenerate_frames) {
  check_shapes(pred, gt);
  if (static_cast<Eigen::Index>(frames) * joints != pred.rows() || joints < 3) {
    throw ValidationError("p_mpjpe: needs (frames * joints) rows with joints >= 3");
  }
  double total = 0.0;
  int degenerate = 0;
  for (int t = 0; t < frames; ++t) {
    const auto p = pred.middleRows(static_cast<Eigen::Index>(t) * joints, joints);
    const auto g = gt.middleRows(static_cast<Eigen::Index>(t) * joints, joints);
    bool frame_degenerate = false;
    const Eigen::MatrixXd aligned = procrustes_align(p, g, &frame_degenerate);
    degenerate += frame_degenerate ? 1 : 0;
    total += (aligned - g).rowwise().norm().sum();
  }
  if (degenerate_frames) *degenerate_frames = degenerate;
  return total / static_cast<double>(pred.rows());
}

double pck(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, double threshold_mm) {
  check_shapes(pred, gt);
  const Eigen::VectorXd err = (pred - gt).rowwise().norm();
  const auto correct = (err.array() <= threshold_mm).count();
  return 100.0 * static_cast<double>(correct) / static_cast<double>(err.size());
}

double auc(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt) {
  double sum = 0.0;
  int count = 0;
  for (double threshold = 0.0; threshold <= kPckThresholdMm + 1e-9;
       threshold += kAucThresholdStepMm) {
    sum += pck(pred, gt, threshold);
    ++count;
  }
  return sum / count;
}

double mpjpe(const PoseSeq3D& pred, const PoseSeq3D& gt) { return mpjpe(pred.data, gt.data); }

double p_mpjpe(const PoseSeq3D& pred, const PoseSeq3D& gt, int* degenerate_frames) {
  return p_mpjpe(pred.data, gt.data, pred.frames, pred.joints(), degenerate_frames);
}

double pck(const PoseSeq3D& pred, const PoseSeq3D& gt, double threshold_mm) {
  return pck(pred.data, gt.data, threshold_mm);
}

double auc(const PoseSeq3D& pred, const PoseSeq3D& gt) { return auc(pred.data, gt.data); }

void EvalReport::write_text(std::ostream& os) const {
  os << "actionpose evaluation report\n";
  os << std::fixed << std::setprecision(6);
  os << "items: " << per_clip.size() << "\n";
  os << "mpjpe_mm: " << mpjpe_mm << "\n";
  os << "p_mpjpe_mm: " << p_mpjpe_mm << "\n";
  os << "pck_percent: " << pck_percent << "\n";
  os << "auc_percent: " << auc_percent << "\n";
  os << "per-clip:\n";
  for (const auto& item : per_clip) {
    os << "  clip " << item.clip_id << ' ' << item.view << " mpjpe_mm " << item.mpjpe_mm
       << " p_mpjpe_mm " << item.p_mpjpe_mm << " pck_percent " << item.pck_percent
       << " auc_percent " << item.auc_percent << "\n";
  }
}

void EvalReport::write_kv(std::ostream& os) const {
  os << std::fixed << std::setprecision(9);
  os << "mpjpe_mm = " << mpjpe_mm << "\n";
  os << "p_mpjpe_mm = " << p_mpjpe_mm << "\n";
  os << "pck_percent = " << pck_percent << "\n";
  os << "auc_percent = " << auc_percent << "\n";
  os << "num_items = " << per_clip.size() << "\n";
  for (const auto& item : per_clip) {
    const std::string prefix = "item." + item.clip_id + "." + item.view + ".";
    os << prefix << "mpjpe_mm = " << item.mpjpe_mm << "\n";
    os << prefix << "p_mpjpe_mm = " << item.p_mpjpe_mm << "\n";
    os << prefix << "pck_percent = " << item.pck_percent << "\n";
    os << prefix << "auc_percent = " << item.auc_percent << "\n";
  }
}

}  // namespace actionpose
