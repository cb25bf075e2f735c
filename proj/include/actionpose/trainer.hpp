// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "actionpose/config.hpp"
#include "actionpose/corpus.hpp"
#include "actionpose/corruption.hpp"
#include "actionpose/losses.hpp"
#include "actionpose/metrics.hpp"
#include "actionpose/model.hpp"

namespace actionpose {

enum class Stage { pretrain, finetune };

enum class LrSchedule { constant, cosine };

struct TrainConfig {
  Stage stage = Stage::pretrain;
  double lr = 0.0005;
  // Constant by default; cosine decays to lr_final_fraction * lr over the run.
  LrSchedule lr_schedule = LrSchedule::constant;
  double lr_final_fraction = 0.1;
  int batch_size = 16;
  int steps = 500;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int sequence_frames = 27;  // training window T
  bool both_views = true;
  int log_every = 1;
  int eval_every_epochs = 0;    // 0 disables per-epoch evaluation
  double finetune_sigma = 0.0;  // optional light input noise during fine-tuning

  LossConfig loss;
  ModelConfig model;
  CorruptionConfig corruption;

  void validate() const;

  // Named profiles: "tiny" (desk-scale) and "paper" (the hyperparameters the
  // paper states, where it states them).
  static TrainConfig profile(const std::string& name);

  // Flat key-value round trip; unknown keys are rejected with their paths.
  static TrainConfig from_kv(const KeyValues& kv);
  KeyValues to_kv() const;

  // Steps per epoch: one pass over every (clip, view) anchor.
  int epoch_steps(const Corpus& corpus) const;
};

struct StepStats {
  long step = 0;
  double l_con = 0.0;
  double l_3d = 0.0;
  double l_v = 0.0;
  double total = 0.0;
};

struct TrainLog {
  std::vector<StepStats> steps;
  std::vector<std::pair<long, EvalReport>> epoch_evals;
  long l_con_evaluations = 0;  // instrumentation: must stay 0 in fine-tuning
  long clamp_events = 0;       // probability-floor hits in the focal-KL term

  // Append-only line-oriented records; wall time appears only in '#' header
  // and footer lines, so reruns are byte-identical outside them.
  void write(const std::string& path, std::uint64_t run_seed, double wall_seconds) const;
};

// AdamW with decoupled weight decay over an explicit parameter subset.
class AdamW {
 public:
  AdamW(std::vector<ag::Parameter*> params, double lr, double beta1, double beta2,
        double eps, double weight_decay);
  void step();
  void set_lr(double lr) { lr_ = lr; }
  const std::vector<ag::Parameter*>& params() const { return params_; }

 private:
  std::vector<ag::Parameter*> params_;
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

// Learning rate at a given step under the configured schedule.
double scheduled_lr(const TrainConfig& config, long step);

// Per-step details of the pretraining objective on one sampled batch; used
// by training and by the gradient-flow tests.
struct PretrainStepResult {
  StepStats stats;
  bool clamped = false;
};

// Builds the full pretraining graph for one batch on the given tape and
// returns the scalar loss node (callers may run backward on it).
struct PretrainGraph {
  ag::Node* loss = nullptr;
  ag::Node* l_con = nullptr;
  ag::Node* l_3d = nullptr;
  ag::Node* l_v = nullptr;
  bool clamped = false;
};
PretrainGraph build_pretrain_graph(ag::Tape& tape, ActionPoseModel& model,
                                   const ContrastiveBatch& batch, const LossConfig& loss_cfg,
                                   bool train, Rng* dropout_rng);

// Runs pretraining on all parameters. When out_dir is set, writes
// checkpoint_epoch.ckpt at each epoch boundary.
TrainLog pretrain(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config,
                  const std::optional<std::string>& out_dir = std::nullopt);

// Fine-tunes the pose encoder and regression head only; the text encoder and
// both pooling stacks are excluded from the optimizer. Only the
// reconstruction losses are evaluated.
TrainLog finetune(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config,
                  const std::optional<std::string>& out_dir = std::nullopt);

// Deterministic evaluation protocol: per clip and view, the centered window
// of config.sequence_frames frames (or the whole clip if shorter), inference
// mode, root-centered comparison in millimeters.
EvalReport evaluate(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config);

// Fraction of (clip, view) anchors whose own label outranks K seeded
// negatives under the alignment score (uncorrupted inputs).
double retrieval_top1(ActionPoseModel& model, const Corpus& corpus,
                      const TrainConfig& config);

// The class histogram line printed by gen-data.
std::string histogram_summary(const Corpus& corpus);

}  // namespace actionpose
