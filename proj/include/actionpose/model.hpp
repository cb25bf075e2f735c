// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "actionpose/autograd.hpp"
#include "actionpose/skeleton.hpp"

namespace actionpose {

// Word-level tokenizer over a fixed vocabulary. Every sequence starts with
// <CLS> and ends with <SEP>; unknown words map to <UNK>.
class Tokenizer {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::int32_t kSep = 3;

  explicit Tokenizer(const std::vector<std::string>& words);
  // Vocabulary of the procedural corpus generator.
  static Tokenizer for_generator_vocab();

  std::vector<std::int32_t> tokenize(const std::string& text) const;
  std::string detokenize(const std::vector<std::int32_t>& ids) const;
  int vocab_size() const { return static_cast<int>(id_to_word_.size()); }

 private:
  std::vector<std::string> id_to_word_;
  std::map<std::string, std::int32_t> word_to_id_;
};

struct ModelConfig {
  int c_in = 3;         // input channels (x, y, confidence)
  int c_f = 64;         // feature width
  int joints = kNumJoints;
  int t_max = 243;      // maximum pose frames
  int l1 = 3;           // pose blocks before the global-representation tap
  int l2 = 2;           // pose blocks after it
  int l3 = 3;           // text blocks
  int heads = 4;
  int ff_mult = 4;      // feed-forward hidden width multiplier
  int vocab_size = 0;
  int text_max_tokens = 16;
  double dropout = 0.0;
  int align_dim = 32;   // shared alignment-space width
  // Disables the learned temporal position embeddings (test mode for the
  // frame-permutation equivariance checks).
  bool use_temporal_pe = true;

  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

// The dual-stream network: spatial-temporal pose encoder with a learnable
// <POSE> token, BERT-style text encoder, the two pooling stacks projecting
// into the shared alignment space, and the per-token 3D regression head.
class ActionPoseModel {
 public:
  ActionPoseModel(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  // All trainable tensors in fixed creation order.
  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
  ag::Parameter& param(const std::string& name);
  long param_count() const;
  // Closed-form count from the configuration alone; equals param_count().
  static long expected_param_count(const ModelConfig& config);

  // Parameters updated during fine-tuning: pose encoder and regression head.
  static bool is_finetuned_param(const std::string& name);

  // ----- forward builders (values computed eagerly on the tape) -----

  // x: (B*T*J) x c_in rows ordered (sample, frame, joint).
  struct PoseBatch {
    int batch = 0;
    int frames = 0;
    ag::Matrix x;
  };

  struct PoseTaps {
    ag::Node* mid;    // after block l1; feeds pooling
    ag::Node* final;  // after block l1+l2; feeds regression
  };
  PoseTaps pose_encode(ag::Tape& tape, const PoseBatch& batch, bool train, Rng* dropout_rng);

  // (B x align_dim), rows unit-normalized.
  ag::Node* pool_pose(ag::Tape& tape, ag::Node* mid_tap, int batch);

  // Per-token features of one tokenized text, (N x c_f).
  ag::Node* text_encode(ag::Tape& tape, const std::vector<std::int32_t>& ids, bool train,
                        Rng* dropout_rng);

  // (1 x align_dim), unit-normalized.
  ag::Node* pool_text(ag::Tape& tape, ag::Node* text_features, bool train, Rng* dropout_rng);

  // (B*T*J) x 3 prediction; drops the <POSE> token rows.
  ag::Node* regress_3d(ag::Tape& tape, ag::Node* final_tap, int batch, int frames);

  // Convenience inference helpers (no gradients kept by the caller).
  ag::Matrix embed_pose(const PoseSeq2D& seq);                 // 1 x align_dim
  ag::Matrix predict_3d(const PoseSeq2D& seq);                 // (T*J) x 3

  // ----- checkpoint io -----
  void save_checkpoint(const std::string& path) const;
  static ActionPoseModel load_checkpoint(const std::string& path);
  // Loads parameter values into this model; rejects with the list of
  // mismatched names if the file is incompatible.
  void load_parameters(const std::string& path);

 private:
  struct Block {
    // Parameter name prefixes, resolved lazily through param().
    std::string prefix;
  };
  ag::Parameter& add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  void init_params(std::uint64_t seed);
  ag::Node* attention_sublayer(ag::Tape& tape, ag::Node* x, const std::string& prefix,
                               int n_slices, int slice_len);
  ag::Node* ff_sublayer(ag::Tape& tape, ag::Node* x, const std::string& prefix, bool train,
                        Rng* dropout_rng);
  ag::Node* pose_block(ag::Tape& tape, ag::Node* x, int index, int batch, int frames,
                       bool train, Rng* dropout_rng);
  ag::Node* text_block(ag::Tape& tape, ag::Node* x, int index, bool train, Rng* dropout_rng);

  ModelConfig config_;
  std::vector<std::unique_ptr<ag::Parameter>> params_;
  std::map<std::string, ag::Parameter*> by_name_;
};

}  // namespace actionpose
