// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "actionpose/errors.hpp"

namespace actionpose {

enum class Reduction { mean, sum };

struct LossConfig {
  double tau = 0.1;        // similarity temperature
  int negatives = 16;      // K
  double gamma = 2.0;      // focal exponent
  double lambda_3d = 1.0;
  double lambda_v = 0.5;
  double epsilon_smooth = 0.0;  // label smoothing of the target distribution
  Reduction reduction = Reduction::mean;

  void validate() const;
};

// Probability floor applied where the target has mass but the predicted
// probability underflows; keeps the loss finite.
constexpr double kProbFloor = 1e-12;

// Temperature-scaled softmax over the dot products of h_p with the K+1
// candidate vectors (rows of candidates). Sums to 1.
Eigen::VectorXd similarity_softmax(const Eigen::VectorXd& h_p,
                                   const Eigen::MatrixXd& candidates, double tau);

struct FocalKl {
  double value = 0.0;
  bool clamped = false;  // some s_i hit the probability floor under positive y_i
};

// Per-sample focal-KL term: sum_i (1 - s_i)^gamma * y_i * log(y_i / s_i),
// with the convention 0 * log(0/s) = 0.
FocalKl focal_kl_loss(const Eigen::VectorXd& s, const Eigen::VectorXd& y, double gamma);

// d(focal_kl_loss)/ds, elementwise.
Eigen::VectorXd focal_kl_grad_s(const Eigen::VectorXd& s, const Eigen::VectorXd& y,
                                double gamma);

// Batched focal-KL over rows of s/y with the configured reduction.
FocalKl focal_kl_loss_batch(const Eigen::MatrixXd& s, const Eigen::MatrixXd& y,
                            double gamma, Reduction reduction);

// Value and analytic gradients of the composed alignment loss
// focal_kl(softmax(dots / tau), y) with respect to h_p and the candidates.
struct ContrastiveGrad {
  double value = 0.0;
  bool clamped = false;
  Eigen::VectorXd s;             // the softmax probabilities
  Eigen::VectorXd d_h_p;
  Eigen::MatrixXd d_candidates;
};
ContrastiveGrad contrastive_alignment_loss(const Eigen::VectorXd& h_p,
                                           const Eigen::MatrixXd& candidates,
                                           const Eigen::VectorXd& y, double tau,
                                           double gamma);

// Gradient of focal_kl(softmax(z), y) with respect to the logits z.
Eigen::VectorXd focal_kl_softmax_grad_logits(const Eigen::VectorXd& s,
                                             const Eigen::VectorXd& y, double gamma);

// Sum (or mean) over rows of the Euclidean distance between paired 3D
// points. pred/gt are (N x 3) stacks of per-joint positions.
double loss_3d(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
               Reduction reduction = Reduction::sum);
Eigen::MatrixXd loss_3d_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                             Reduction reduction = Reduction::sum);

// Same distance on first temporal differences of a single sequence whose
// rows are ordered (frame, joint); T-1 difference frames. Requires T >= 2.
double loss_velocity(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int frames,
                     int joints, Reduction reduction = Reduction::sum);
Eigen::MatrixXd loss_velocity_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                                   int frames, int joints,
                                   Reduction reduction = Reduction::sum);

// L = L_con + lambda_3d * L_3D + lambda_v * L_v.
double total_pretrain_loss(double l_con, double l_3d, double l_v, const LossConfig& config);

}  // namespace actionpose
