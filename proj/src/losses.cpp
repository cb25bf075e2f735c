// SPDX-License-Identifier: Apache-2.0
#include "actionpose/losses.hpp"

#include <cmath>

namespace actionpose {

namespace {

// Distance below which the norm gradient is treated as zero (the subgradient
// at the kink of ||.||).
constexpr double kNormEps = 1e-12;

double clamp_prob(double s, bool& clamped) {
  if (s < kProbFloor) {
    clamped = true;
    return kProbFloor;
  }
  return s;
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ValidationError("loss.tau must be positive");
  if (gamma < 0.0) throw ValidationError("loss.gamma must be non-negative");
  if (negatives < 1) throw ValidationError("loss.negatives must be at least 1");
  if (lambda_3d < 0.0 || lambda_v < 0.0) {
    throw ValidationError("loss weights must be non-negative");
  }
  if (epsilon_smooth < 0.0 || epsilon_smooth >= 1.0) {
    throw ValidationError("loss.epsilon_smooth must be in [0, 1)");
  }
}

Eigen::VectorXd similarity_softmax(const Eigen::VectorXd& h_p,
                                   const Eigen::MatrixXd& candidates, double tau) {
  if (candidates.rows() == 0) {
    throw ValidationError("similarity_softmax: empty candidate list");
  }
  if (candidates.cols() != h_p.size()) {
    throw ValidationError("similarity_softmax: candidate width mismatch");
  }
  if (!(tau > 0.0)) throw ValidationError("similarity_softmax: tau must be positive");
  Eigen::VectorXd z = candidates * h_p / tau;
  const double zmax = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - zmax).exp();
  return e / e.sum();
}

FocalKl focal_kl_loss(const Eigen::VectorXd& s, const Eigen::VectorXd& y, double gamma) {
  if (s.size() != y.size() || s.size() == 0) {
    throw ValidationError("focal_kl_loss: distributions must have equal, positive size");
  }
  FocalKl out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) <= 0.0) continue;  // 0 * log(0/s) = 0
    const double si = clamp_prob(s(i), out.clamped);
    out.value += std::pow(1.0 - si, gamma) * y(i) * std::log(y(i) / si);
  }
  return out;
}

Eigen::VectorXd focal_kl_grad_s(const Eigen::VectorXd& s, const Eigen::VectorXd& y,
                                double gamma) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(s.size());
  bool clamped = false;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) <= 0.0) continue;
    const double si = clamp_prob(s(i), clamped);
    const double one_minus = 1.0 - si;
    const double log_ratio = std::log(y(i) / si);
    double focal_term = 0.0;
    if (gamma > 0.0) {
      focal_term = -gamma * std::pow(one_minus, gamma - 1.0) * y(i) * log_ratio;
    }
    g(i) = focal_term - std::pow(one_minus, gamma) * y(i) / si;
  }
  return g;
}

FocalKl focal_kl_loss_batch(const Eigen::MatrixXd& s, const Eigen::MatrixXd& y,
                            double gamma, Reduction reduction) {
  if (s.rows() != y.rows() || s.cols() != y.cols()) {
    throw ValidationError("focal_kl_loss_batch: shape mismatch");
  }
  FocalKl out;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const FocalKl row = focal_kl_loss(s.row(r).transpose(), y.row(r).transpose(), gamma);
    out.value += row.value;
    out.clamped = out.clamped || row.clamped;
  }
  if (reduction == Reduction::mean && s.rows() > 0) {
    out.value /= static_cast<double>(s.rows());
  }
  return out;
}

Eigen::VectorXd focal_kl_softmax_grad_logits(const Eigen::VectorXd& s,
                                             const Eigen::VectorXd& y, double gamma) {
  const Eigen::VectorXd ds = focal_kl_grad_s(s, y, gamma);
  const double dot = ds.dot(s);
  return s.array() * (ds.array() - dot);
}

ContrastiveGrad contrastive_alignment_loss(const Eigen::VectorXd& h_p,
                                           const Eigen::MatrixXd& candidates,
                                           const Eigen::VectorXd& y, double tau,
                                           double gamma) {
  ContrastiveGrad out;
  out.s = similarity_softmax(h_p, candidates, tau);
  const FocalKl loss = focal_kl_loss(out.s, y, gamma);
  out.value = loss.value;
  out.clamped = loss.clamped;
  const Eigen::VectorXd dz = focal_kl_softmax_grad_logits(out.s, y, gamma) / tau;
  out.d_h_p = candidates.transpose() * dz;
  out.d_candidates = dz * h_p.transpose();
  return out;
}

double loss_3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, Reduction reduction) {
  if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3) {
    throw ValidationError("loss_3d: inputs must be matching (N x 3) stacks");
  }
  const double sum = (pred - gt).rowwise().norm().sum();
  if (reduction == Reduction::mean && pred.rows() > 0) {
    return sum / static_cast<double>(pred.rows());
  }
  return sum;
}

Eigen::MatrixXd loss_3d_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                             Reduction reduction) {
  Eigen::MatrixXd g = pred - gt;
  const double w = reduction == Reduction::mean && pred.rows() > 0
                       ? 1.0 / static_cast<double>(pred.rows())
                       : 1.0;
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    const double n = g.row(r).norm();
    if (n > kNormEps) {
      g.row(r) *= w / n;
    } else {
      g.row(r).setZero();
    }
  }
  return g;
}

namespace {

Eigen::MatrixXd temporal_diff(const Eigen::MatrixXd& x, int frames, int joints) {
  Eigen::MatrixXd d((frames - 1) * joints, 3);
  for (int t = 1; t < frames; ++t) {
    d.middleRows(static_cast<Eigen::Index>(t - 1) * joints, joints) =
        x.middleRows(static_cast<Eigen::Index>(t) * joints, joints) -
        x.middleRows(static_cast<Eigen::Index>(t - 1) * joints, joints);
  }
  return d;
}

}  // namespace

double loss_velocity(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int frames,
                     int joints, Reduction reduction) {
  if (frames < 2) throw ValidationError("loss_velocity: needs at least 2 frames");
  if (pred.rows() != static_cast<Eigen::Index>(frames) * joints || pred.rows() != gt.rows()) {
    throw ValidationError("loss_velocity: shape mismatch");
  }
  return loss_3d(temporal_diff(pred, frames, joints), temporal_diff(gt, frames, joints),
                 reduction);
}

Eigen::MatrixXd loss_velocity_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                                   int frames, int joints, Reduction reduction) {
  const Eigen::MatrixXd dv = loss_3d_grad(temporal_diff(pred, frames, joints),
                                          temporal_diff(gt, frames, joints), reduction);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(pred.rows(), 3);
  for (int t = 1; t < frames; ++t) {
    const auto block = dv.middleRows(static_cast<Eigen::Index>(t - 1) * joints, joints);
    g.middleRows(static_cast<Eigen::Index>(t) * joints, joints) += block;
    g.middleRows(static_cast<Eigen::Index>(t - 1) * joints, joints) -= block;
  }
  return g;
}

double total_pretrain_loss(double l_con, double l_3d, double l_v, const LossConfig& config) {
  config.validate();
  if (!std::isfinite(l_con) || !std::isfinite(l_3d) || !std::isfinite(l_v)) {
    throw ValidationError("total_pretrain_loss: components must be finite");
  }
  return l_con + config.lambda_3d * l_3d + config.lambda_v * l_v;
}

}  // namespace actionpose
