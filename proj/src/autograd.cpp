// SPDX-License-Identifier: Apache-2.0
#include "actionpose/autograd.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace actionpose::ag {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

void accumulate(Node* n, const Matrix& g) {
  n->ensure_grad();
  n->grad += g;
}

// In-place row softmax of a matrix.
void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    RowArray e = (m.row(r).array() - mx).exp();
    m.row(r) = (e / e.sum()).matrix();
  }
}

}  // namespace

template <typename T, typename... Args>
T* Tape::make(Args&&... args) {
  auto node = std::make_unique<T>(std::forward<Args>(args)...);
  T* raw = node.get();
  nodes_.push_back(std::move(node));
  return raw;
}

void Tape::backward(Node* loss) {
  if (loss->val.size() != 1) throw ValidationError("backward: loss must be a scalar node");
  loss->ensure_grad();
  loss->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if ((*it)->has_grad()) (*it)->backward();
  }
}

// ---------------------------------------------------------------------------
// leaves

namespace {

class InputNode final : public Node {
 public:
  explicit InputNode(Matrix v) { val = std::move(v); }
};

}  // namespace

Node* Tape::input(Matrix v) { return make<InputNode>(std::move(v)); }

// ---------------------------------------------------------------------------
// linear

namespace {

class LinearNode final : public Node {
 public:
  LinearNode(Node* x, Parameter& w, Parameter* b) : x_(x), w_(w), b_(b) {
    if (x->val.cols() != w.value.rows()) {
      throw ValidationError("linear: input width does not match " + w.name);
    }
    val = x->val * w.value;
    if (b_) val.rowwise() += b_->value.row(0);
  }

  void backward() override {
    accumulate(x_, grad * w_.value.transpose());
    w_.grad.noalias() += x_->val.transpose() * grad;
    if (b_) b_->grad.row(0) += grad.colwise().sum();
  }

 private:
  Node* x_;
  Parameter& w_;
  Parameter* b_;
};

}  // namespace

Node* Tape::linear(Node* x, Parameter& weight, Parameter* bias) {
  return make<LinearNode>(x, weight, bias);
}

// ---------------------------------------------------------------------------
// add / gelu / layer norm

namespace {

class AddNode final : public Node {
 public:
  AddNode(Node* a, Node* b) : a_(a), b_(b) {
    if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols()) {
      throw ValidationError("add: shape mismatch");
    }
    val = a->val + b->val;
  }
  void backward() override {
    accumulate(a_, grad);
    accumulate(b_, grad);
  }

 private:
  Node* a_;
  Node* b_;
};

class GeluNode final : public Node {
 public:
  explicit GeluNode(Node* x) : x_(x) {
    val = x->val.unaryExpr(
        [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  }
  void backward() override {
    Matrix d = x_->val.unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      return cdf + v * pdf;
    });
    accumulate(x_, grad.cwiseProduct(d));
  }

 private:
  Node* x_;
};

class LayerNormNode final : public Node {
 public:
  LayerNormNode(Node* x, Parameter& gamma, Parameter& beta, double eps)
      : x_(x), gamma_(gamma), beta_(beta) {
    const Eigen::Index rows = x->val.rows();
    const Eigen::Index cols = x->val.cols();
    if (gamma.value.cols() != cols || beta.value.cols() != cols) {
      throw ValidationError("layer_norm: parameter width mismatch for " + gamma.name);
    }
    inv_std_.resize(rows);
    normed_.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double mean = x->val.row(r).mean();
      const double var = (x->val.row(r).array() - mean).square().mean();
      inv_std_(r) = 1.0 / std::sqrt(var + eps);
      normed_.row(r) = (x->val.row(r).array() - mean).matrix() * inv_std_(r);
    }
    val = normed_ * gamma.value.row(0).asDiagonal();
    val.rowwise() += beta.value.row(0);
  }

  void backward() override {
    const Eigen::Index cols = val.cols();
    gamma_.grad.row(0) += (grad.array() * normed_.array()).colwise().sum().matrix();
    beta_.grad.row(0) += grad.colwise().sum();
    Matrix gx(val.rows(), cols);
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      // dL/dxhat for the row, then the standard layer-norm backward.
      const Eigen::RowVectorXd gy = grad.row(r).cwiseProduct(gamma_.value.row(0));
      const double mean_gy = gy.mean();
      const double mean_gy_xhat = gy.cwiseProduct(normed_.row(r)).mean();
      gx.row(r) = (gy - Eigen::RowVectorXd::Constant(cols, mean_gy) -
                   normed_.row(r) * mean_gy_xhat) *
                  inv_std_(r);
    }
    accumulate(x_, gx);
  }

 private:
  Node* x_;
  Parameter& gamma_;
  Parameter& beta_;
  Eigen::VectorXd inv_std_;
  Matrix normed_;
};

}  // namespace

Node* Tape::add(Node* a, Node* b) { return make<AddNode>(a, b); }
Node* Tape::gelu(Node* x) { return make<GeluNode>(x); }
Node* Tape::layer_norm(Node* x, Parameter& gamma, Parameter& beta, double eps) {
  return make<LayerNormNode>(x, gamma, beta, eps);
}

// ---------------------------------------------------------------------------
// row rearrangement

namespace {

class RowPermuteNode final : public Node {
 public:
  RowPermuteNode(Node* x, std::vector<int> perm) : x_(x), perm_(std::move(perm)) {
    if (static_cast<Eigen::Index>(perm_.size()) != x->val.rows()) {
      throw ValidationError("row_permute: permutation size mismatch");
    }
    val.resize(x->val.rows(), x->val.cols());
    for (std::size_t i = 0; i < perm_.size(); ++i) {
      val.row(static_cast<Eigen::Index>(i)) = x->val.row(perm_[i]);
    }
  }
  void backward() override {
    x_->ensure_grad();
    for (std::size_t i = 0; i < perm_.size(); ++i) {
      x_->grad.row(perm_[i]) += grad.row(static_cast<Eigen::Index>(i));
    }
  }

 private:
  Node* x_;
  std::vector<int> perm_;
};

class RowGatherNode final : public Node {
 public:
  RowGatherNode(Node* x, std::vector<int> idx) : x_(x), idx_(std::move(idx)) {
    val.resize(static_cast<Eigen::Index>(idx_.size()), x->val.cols());
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      val.row(static_cast<Eigen::Index>(i)) = x->val.row(idx_[i]);
    }
  }
  void backward() override {
    x_->ensure_grad();
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      x_->grad.row(idx_[i]) += grad.row(static_cast<Eigen::Index>(i));
    }
  }

 private:
  Node* x_;
  std::vector<int> idx_;
};

class PrependTokenNode final : public Node {
 public:
  PrependTokenNode(Node* x, Parameter& token, int batch, int frames, int joints)
      : x_(x), token_(token), batch_(batch), frames_(frames), joints_(joints) {
    if (x->val.rows() != static_cast<Eigen::Index>(batch) * frames * joints) {
      throw ValidationError("prepend_token: input row count mismatch");
    }
    if (token.value.rows() != joints || token.value.cols() != x->val.cols()) {
      throw ValidationError("prepend_token: token shape mismatch");
    }
    val.resize(static_cast<Eigen::Index>(batch) * (frames + 1) * joints, x->val.cols());
    for (int b = 0; b < batch; ++b) {
      val.middleRows(out_row(b, 0), joints) = token.value;
      val.middleRows(out_row(b, 1), static_cast<Eigen::Index>(frames) * joints) =
          x->val.middleRows(static_cast<Eigen::Index>(b) * frames * joints,
                            static_cast<Eigen::Index>(frames) * joints);
    }
  }

  void backward() override {
    x_->ensure_grad();
    for (int b = 0; b < batch_; ++b) {
      token_.grad += grad.middleRows(out_row(b, 0), joints_);
      x_->grad.middleRows(static_cast<Eigen::Index>(b) * frames_ * joints_,
                          static_cast<Eigen::Index>(frames_) * joints_) +=
          grad.middleRows(out_row(b, 1), static_cast<Eigen::Index>(frames_) * joints_);
    }
  }

 private:
  Eigen::Index out_row(int b, int t) const {
    return (static_cast<Eigen::Index>(b) * (frames_ + 1) + t) * joints_;
  }
  Node* x_;
  Parameter& token_;
  int batch_, frames_, joints_;
};

class AddTableRowsNode final : public Node {
 public:
  AddTableRowsNode(Node* x, Parameter& table, std::vector<int> ids)
      : x_(x), table_(table), ids_(std::move(ids)) {
    if (static_cast<Eigen::Index>(ids_.size()) != x->val.rows()) {
      throw ValidationError("add_table_rows: id count mismatch");
    }
    val = x->val;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      val.row(static_cast<Eigen::Index>(i)) += table.value.row(ids_[i]);
    }
  }
  void backward() override {
    accumulate(x_, grad);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      table_.grad.row(ids_[i]) += grad.row(static_cast<Eigen::Index>(i));
    }
  }

 private:
  Node* x_;
  Parameter& table_;
  std::vector<int> ids_;
};

class EmbedNode final : public Node {
 public:
  EmbedNode(Parameter& table, std::vector<int> ids) : table_(table), ids_(std::move(ids)) {
    val.resize(static_cast<Eigen::Index>(ids_.size()), table.value.cols());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (ids_[i] < 0 || ids_[i] >= table.value.rows()) {
        throw ValidationError("embed: id out of range for " + table.name);
      }
      val.row(static_cast<Eigen::Index>(i)) = table.value.row(ids_[i]);
    }
  }
  void backward() override {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      table_.grad.row(ids_[i]) += grad.row(static_cast<Eigen::Index>(i));
    }
  }

 private:
  Parameter& table_;
  std::vector<int> ids_;
};

}  // namespace

Node* Tape::row_permute(Node* x, std::vector<int> perm) {
  return make<RowPermuteNode>(x, std::move(perm));
}
Node* Tape::row_gather(Node* x, std::vector<int> idx) {
  return make<RowGatherNode>(x, std::move(idx));
}
Node* Tape::prepend_token(Node* x, Parameter& token, int batch, int frames, int joints) {
  return make<PrependTokenNode>(x, token, batch, frames, joints);
}
Node* Tape::add_table_rows(Node* x, Parameter& table, std::vector<int> row_ids) {
  return make<AddTableRowsNode>(x, table, std::move(row_ids));
}
Node* Tape::embed(Parameter& table, std::vector<int> ids) {
  return make<EmbedNode>(table, std::move(ids));
}

// ---------------------------------------------------------------------------
// attention

namespace {

class AttentionNode final : public Node {
 public:
  AttentionNode(Node* q, Node* k, Node* v, int n_slices, int slice_len, int heads)
      : q_(q), k_(k), v_(v), n_slices_(n_slices), slice_len_(slice_len), heads_(heads) {
    const Eigen::Index c = q->val.cols();
    if (c % heads != 0) throw ValidationError("attention: heads must divide the width");
    if (q->val.rows() != static_cast<Eigen::Index>(n_slices) * slice_len ||
        k->val.rows() != q->val.rows() || v->val.rows() != q->val.rows() ||
        k->val.cols() != c || v->val.cols() != c) {
      throw ValidationError("attention: q/k/v shape mismatch");
    }
    head_dim_ = static_cast<int>(c) / heads;
    inv_sqrt_d_ = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    probs_.resize(static_cast<Eigen::Index>(n_slices) * heads * slice_len, slice_len);
    val.resize(q->val.rows(), c);
    for (int s = 0; s < n_slices; ++s) {
      for (int h = 0; h < heads_; ++h) {
        const auto qb = block(q_->val, s, h);
        const auto kb = block(k_->val, s, h);
        const auto vb = block(v_->val, s, h);
        Matrix scores = qb * kb.transpose() * inv_sqrt_d_;
        softmax_rows(scores);
        prob_block(s, h) = scores;
        val.block(static_cast<Eigen::Index>(s) * slice_len_, h * head_dim_, slice_len_,
                  head_dim_) = scores * vb;
      }
    }
  }

  void backward() override {
    q_->ensure_grad();
    k_->ensure_grad();
    v_->ensure_grad();
    for (int s = 0; s < n_slices_; ++s) {
      for (int h = 0; h < heads_; ++h) {
        const auto gout = grad.block(static_cast<Eigen::Index>(s) * slice_len_,
                                     h * head_dim_, slice_len_, head_dim_);
        const Matrix a = prob_block(s, h);
        const auto qb = block(q_->val, s, h);
        const auto kb = block(k_->val, s, h);
        const auto vb = block(v_->val, s, h);
        const Matrix ga = gout * vb.transpose();
        Matrix gs(a.rows(), a.cols());
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          const double dot = ga.row(r).dot(a.row(r));
          gs.row(r) = a.row(r).cwiseProduct(
              ga.row(r) - Eigen::RowVectorXd::Constant(a.cols(), dot));
        }
        gs *= inv_sqrt_d_;
        block(q_->grad, s, h) += gs * kb;
        block(k_->grad, s, h) += gs.transpose() * qb;
        block(v_->grad, s, h) += a.transpose() * gout;
      }
    }
  }

 private:
  Eigen::Block<Matrix> block(Matrix& m, int s, int h) {
    return m.block(static_cast<Eigen::Index>(s) * slice_len_, h * head_dim_, slice_len_,
                   head_dim_);
  }
  Eigen::Block<Matrix> prob_block(int s, int h) {
    return probs_.block((static_cast<Eigen::Index>(s) * heads_ + h) * slice_len_, 0,
                        slice_len_, slice_len_);
  }
  Node *q_, *k_, *v_;
  int n_slices_, slice_len_, heads_, head_dim_ = 0;
  double inv_sqrt_d_ = 0.0;
  Matrix probs_;
};

}  // namespace

Node* Tape::attention(Node* q, Node* k, Node* v, int n_slices, int slice_len, int heads) {
  return make<AttentionNode>(q, k, v, n_slices, slice_len, heads);
}

// ---------------------------------------------------------------------------
// pooling / normalization / concat

namespace {

class PoolJointsNode final : public Node {
 public:
  PoolJointsNode(Node* x, Parameter& weight, int batch, int joints)
      : x_(x), weight_(weight), batch_(batch), joints_(joints) {
    if (x->val.rows() != static_cast<Eigen::Index>(batch) * joints) {
      throw ValidationError("pool_joints: row count mismatch");
    }
    if (weight.value.rows() != joints || weight.value.cols() != 1) {
      throw ValidationError("pool_joints: weight must be (J x 1)");
    }
    const Eigen::ArrayXd w = weight.value.col(0).array();
    const double m = w.maxCoeff();
    Eigen::ArrayXd e = (w - m).exp();
    alpha_ = (e / e.sum()).matrix();
    val.resize(batch, x->val.cols());
    for (int b = 0; b < batch; ++b) {
      val.row(b) =
          alpha_.transpose() * x->val.middleRows(static_cast<Eigen::Index>(b) * joints, joints);
    }
  }

  void backward() override {
    x_->ensure_grad();
    Eigen::VectorXd g_alpha = Eigen::VectorXd::Zero(joints_);
    for (int b = 0; b < batch_; ++b) {
      auto xb = x_->val.middleRows(static_cast<Eigen::Index>(b) * joints_, joints_);
      x_->grad.middleRows(static_cast<Eigen::Index>(b) * joints_, joints_) +=
          alpha_ * grad.row(b);
      g_alpha += xb * grad.row(b).transpose();
    }
    // Through the softmax over the weight vector.
    const double dot = g_alpha.dot(alpha_);
    weight_.grad.col(0) += alpha_.cwiseProduct(g_alpha - Eigen::VectorXd::Constant(joints_, dot));
  }

 private:
  Node* x_;
  Parameter& weight_;
  int batch_, joints_;
  Eigen::VectorXd alpha_;
};

class NormalizeRowsNode final : public Node {
 public:
  explicit NormalizeRowsNode(Node* x) : x_(x) {
    norms_ = x->val.rowwise().norm().cwiseMax(1e-12);
    val = x->val.array().colwise() / norms_.array();
  }
  void backward() override {
    Matrix gx(val.rows(), val.cols());
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      const double dot = grad.row(r).dot(val.row(r));
      gx.row(r) = (grad.row(r) - dot * val.row(r)) / norms_(r);
    }
    accumulate(x_, gx);
  }

 private:
  Node* x_;
  Eigen::VectorXd norms_;
};

class ConcatRowsNode final : public Node {
 public:
  explicit ConcatRowsNode(std::vector<Node*> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ValidationError("concat_rows: empty input list");
    Eigen::Index rows = 0;
    for (auto* p : parts_) rows += p->val.rows();
    val.resize(rows, parts_[0]->val.cols());
    Eigen::Index at = 0;
    for (auto* p : parts_) {
      val.middleRows(at, p->val.rows()) = p->val;
      at += p->val.rows();
    }
  }
  void backward() override {
    Eigen::Index at = 0;
    for (auto* p : parts_) {
      accumulate(p, grad.middleRows(at, p->val.rows()));
      at += p->val.rows();
    }
  }

 private:
  std::vector<Node*> parts_;
};

}  // namespace

Node* Tape::pool_joints(Node* x, Parameter& weight, int batch, int joints) {
  return make<PoolJointsNode>(x, weight, batch, joints);
}
Node* Tape::normalize_rows(Node* x) { return make<NormalizeRowsNode>(x); }
Node* Tape::concat_rows(const std::vector<Node*>& parts) {
  return make<ConcatRowsNode>(parts);
}

// ---------------------------------------------------------------------------
// alignment scores and losses

namespace {

using IdxMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

class GatherDotScoresNode final : public Node {
 public:
  GatherDotScoresNode(Node* h_p, Node* h_w, IdxMatrix idx, double inv_tau)
      : h_p_(h_p), h_w_(h_w), idx_(std::move(idx)), inv_tau_(inv_tau) {
    if (h_p->val.rows() != idx_.rows()) {
      throw ValidationError("gather_dot_scores: row count mismatch");
    }
    val.resize(idx_.rows(), idx_.cols());
    for (Eigen::Index b = 0; b < idx_.rows(); ++b) {
      for (Eigen::Index i = 0; i < idx_.cols(); ++i) {
        val(b, i) = h_p->val.row(b).dot(h_w->val.row(idx_(b, i))) * inv_tau_;
      }
    }
  }

  void backward() override {
    h_p_->ensure_grad();
    h_w_->ensure_grad();
    for (Eigen::Index b = 0; b < idx_.rows(); ++b) {
      for (Eigen::Index i = 0; i < idx_.cols(); ++i) {
        const double g = grad(b, i) * inv_tau_;
        h_p_->grad.row(b) += g * h_w_->val.row(idx_(b, i));
        h_w_->grad.row(idx_(b, i)) += g * h_p_->val.row(b);
      }
    }
  }

 private:
  Node* h_p_;
  Node* h_w_;
  IdxMatrix idx_;
  double inv_tau_;
};

class FocalKlNode final : public Node {
 public:
  FocalKlNode(Node* logits, Matrix y, double gamma, Reduction reduction, bool* clamped_flag)
      : logits_(logits), y_(std::move(y)), gamma_(gamma), reduction_(reduction) {
    if (y_.rows() != logits->val.rows() || y_.cols() != logits->val.cols()) {
      throw ValidationError("focal_kl_from_logits: target shape mismatch");
    }
    s_ = logits->val;
    softmax_rows(s_);
    double total = 0.0;
    bool clamped = false;
    for (Eigen::Index r = 0; r < y_.rows(); ++r) {
      const FocalKl term = focal_kl_loss(s_.row(r).transpose(), y_.row(r).transpose(), gamma);
      total += term.value;
      clamped = clamped || term.clamped;
    }
    if (reduction == Reduction::mean && y_.rows() > 0) {
      total /= static_cast<double>(y_.rows());
    }
    if (clamped_flag) *clamped_flag = clamped;
    val = Matrix::Constant(1, 1, total);
  }

  void backward() override {
    const double w = grad(0, 0) * (reduction_ == Reduction::mean && y_.rows() > 0
                                       ? 1.0 / static_cast<double>(y_.rows())
                                       : 1.0);
    Matrix gz(y_.rows(), y_.cols());
    for (Eigen::Index r = 0; r < y_.rows(); ++r) {
      gz.row(r) =
          w * focal_kl_softmax_grad_logits(s_.row(r).transpose(), y_.row(r).transpose(), gamma_)
                  .transpose();
    }
    accumulate(logits_, gz);
  }

 private:
  Node* logits_;
  Matrix y_;
  double gamma_;
  Reduction reduction_;
  Matrix s_;
};

class DistanceLossNode final : public Node {
 public:
  DistanceLossNode(Node* pred, Matrix target, Reduction reduction)
      : pred_(pred), target_(std::move(target)), reduction_(reduction) {
    val = Matrix::Constant(1, 1, loss_3d(pred->val, target_, reduction));
  }
  void backward() override {
    accumulate(pred_, grad(0, 0) * loss_3d_grad(pred_->val, target_, reduction_));
  }

 private:
  Node* pred_;
  Matrix target_;
  Reduction reduction_;
};

class VelocityLossNode final : public Node {
 public:
  VelocityLossNode(Node* pred, Matrix target, int batch, int frames, int joints,
                   Reduction reduction)
      : pred_(pred), target_(std::move(target)), batch_(batch), frames_(frames),
        joints_(joints), reduction_(reduction) {
    if (pred->val.rows() != static_cast<Eigen::Index>(batch) * frames * joints) {
      throw ValidationError("velocity_loss: row count mismatch");
    }
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
      total += loss_velocity(sample(pred->val, b), sample(target_, b), frames, joints,
                             Reduction::sum);
    }
    if (reduction == Reduction::mean) {
      total /= static_cast<double>(batch) * (frames - 1) * joints;
    }
    val = Matrix::Constant(1, 1, total);
  }

  void backward() override {
    const double w =
        grad(0, 0) * (reduction_ == Reduction::mean
                          ? 1.0 / (static_cast<double>(batch_) * (frames_ - 1) * joints_)
                          : 1.0);
    pred_->ensure_grad();
    for (int b = 0; b < batch_; ++b) {
      pred_->grad.middleRows(static_cast<Eigen::Index>(b) * frames_ * joints_,
                             static_cast<Eigen::Index>(frames_) * joints_) +=
          w * loss_velocity_grad(sample(pred_->val, b), sample(target_, b), frames_,
                                 joints_, Reduction::sum);
    }
  }

 private:
  Matrix sample(const Matrix& m, int b) const {
    return m.middleRows(static_cast<Eigen::Index>(b) * frames_ * joints_,
                        static_cast<Eigen::Index>(frames_) * joints_);
  }
  Node* pred_;
  Matrix target_;
  int batch_, frames_, joints_;
  Reduction reduction_;
};

class WeightedSumNode final : public Node {
 public:
  explicit WeightedSumNode(std::vector<std::pair<Node*, double>> terms)
      : terms_(std::move(terms)) {
    double total = 0.0;
    for (const auto& [node, w] : terms_) {
      if (node->val.size() != 1) throw ValidationError("weighted_sum: non-scalar term");
      total += w * node->scalar();
    }
    val = Matrix::Constant(1, 1, total);
  }
  void backward() override {
    for (auto& [node, w] : terms_) {
      node->ensure_grad();
      node->grad(0, 0) += w * grad(0, 0);
    }
  }

 private:
  std::vector<std::pair<Node*, double>> terms_;
};

class DropoutNode final : public Node {
 public:
  DropoutNode(Node* x, double p, Rng& rng, bool enabled) : x_(x) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("dropout: p must be in [0, 1)");
    if (!enabled || p == 0.0) {
      mask_ = Matrix::Ones(x->val.rows(), x->val.cols());
    } else {
      const double keep = 1.0 - p;
      mask_.resize(x->val.rows(), x->val.cols());
      for (Eigen::Index r = 0; r < mask_.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask_.cols(); ++c) {
          mask_(r, c) = rng.uniform() < p ? 0.0 : 1.0 / keep;
        }
      }
    }
    val = x->val.cwiseProduct(mask_);
  }
  void backward() override { accumulate(x_, grad.cwiseProduct(mask_)); }

 private:
  Node* x_;
  Matrix mask_;
};

}  // namespace

Node* Tape::gather_dot_scores(Node* h_p, Node* h_w,
                              Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx,
                              double inv_tau) {
  return make<GatherDotScoresNode>(h_p, h_w, std::move(idx), inv_tau);
}

Node* Tape::focal_kl_from_logits(Node* logits, Matrix y, double gamma, Reduction reduction,
                                 bool* clamped_flag) {
  return make<FocalKlNode>(logits, std::move(y), gamma, reduction, clamped_flag);
}

Node* Tape::distance_loss(Node* pred, Matrix target, Reduction reduction) {
  return make<DistanceLossNode>(pred, std::move(target), reduction);
}

Node* Tape::velocity_loss(Node* pred, Matrix target, int batch, int frames, int joints,
                          Reduction reduction) {
  return make<VelocityLossNode>(pred, std::move(target), batch, frames, joints, reduction);
}

Node* Tape::weighted_sum(const std::vector<std::pair<Node*, double>>& terms) {
  return make<WeightedSumNode>(terms);
}

Node* Tape::dropout(Node* x, double p, Rng& rng, bool enabled) {
  return make<DropoutNode>(x, p, rng, enabled);
}

}  // namespace actionpose::ag
