// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "actionpose/errors.hpp"
#include "actionpose/losses.hpp"
#include "actionpose/rng.hpp"

// Small reverse-mode autodiff over Eigen double matrices. Forward values are
// computed eagerly as the tape is built (define-by-run); backward() walks the
// tape in reverse creation order. Gradients of trainable tensors accumulate
// directly into Parameter::grad, so a parameter used at several places in
// the graph sums its contributions.
namespace actionpose::ag {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // AdamW state, lazily sized by the optimizer.
  Matrix adam_m;
  Matrix adam_v;

  Parameter(std::string name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name)), value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Node {
 public:
  virtual ~Node() = default;
  Matrix val;
  Matrix grad;  // dL/dval; empty until touched by backward

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix::Zero(val.rows(), val.cols());
  }
  bool has_grad() const { return grad.size() != 0; }
  double scalar() const { return val(0, 0); }

 protected:
  friend class Tape;
  virtual void backward() {}
};

// Owns the nodes of one forward pass. Rebuild a fresh tape per step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf holding a constant (no gradient is propagated into it).
  Node* input(Matrix v);

  // x * W + broadcast bias. bias may be null.
  Node* linear(Node* x, Parameter& weight, Parameter* bias);

  Node* add(Node* a, Node* b);
  Node* gelu(Node* x);
  Node* layer_norm(Node* x, Parameter& gamma, Parameter& beta, double eps = 1e-5);

  // Output row i = x row perm[i]; perm must be a bijection.
  Node* row_permute(Node* x, std::vector<int> perm);
  // Output row i = x row idx[i]; indices may repeat.
  Node* row_gather(Node* x, std::vector<int> idx);

  // Inserts `token` (J x C) at temporal index 0 of every sample of a
  // (B*T*J) x C tensor, yielding (B*(T+1)*J) x C.
  Node* prepend_token(Node* x, Parameter& token, int batch, int frames, int joints);

  // val.row(i) = x.row(i) + table.row(row_ids[i]).
  Node* add_table_rows(Node* x, Parameter& table, std::vector<int> row_ids);

  // Embedding lookup: output row i = table.row(ids[i]).
  Node* embed(Parameter& table, std::vector<int> ids);

  // Multi-head self-attention applied independently to n_slices contiguous
  // row blocks of length slice_len. q/k/v are (n_slices*slice_len) x C.
  Node* attention(Node* q, Node* k, Node* v, int n_slices, int slice_len, int heads);

  // Softmax(weight) convex combination over the J rows of each sample:
  // (B*J) x C -> B x C.
  Node* pool_joints(Node* x, Parameter& weight, int batch, int joints);

  // Row-wise L2 normalization.
  Node* normalize_rows(Node* x);

  Node* concat_rows(const std::vector<Node*>& parts);

  // scores(b, i) = h_p.row(b) . h_w.row(idx(b, i)) * inv_tau.
  Node* gather_dot_scores(Node* h_p, Node* h_w,
                          Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx,
                          double inv_tau);

  // Per-row softmax of the logits followed by the focal-KL term against the
  // matching row of y, reduced over rows. Returns a 1x1 scalar node.
  Node* focal_kl_from_logits(Node* logits, Matrix y, double gamma, Reduction reduction,
                             bool* clamped_flag = nullptr);

  // Sum (or mean) over rows of the Euclidean distance to target. 1x1 node.
  Node* distance_loss(Node* pred, Matrix target, Reduction reduction);

  // Same on first temporal differences of each of the `batch` stacked
  // sequences of `frames` x `joints` rows. 1x1 node.
  Node* velocity_loss(Node* pred, Matrix target, int batch, int frames, int joints,
                      Reduction reduction);

  // weighted sum of 1x1 scalar nodes.
  Node* weighted_sum(const std::vector<std::pair<Node*, double>>& terms);

  // Inverted dropout; identity when disabled or p == 0.
  Node* dropout(Node* x, double p, Rng& rng, bool enabled);

  // Seeds d(loss)/d(loss) = 1 and propagates through the tape in reverse.
  void backward(Node* loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  template <typename T, typename... Args>
  T* make(Args&&... args);
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace actionpose::ag
