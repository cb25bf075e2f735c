// SPDX-License-Identifier: Apache-2.0
#include "actionpose/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "actionpose/parallel.hpp"

namespace actionpose {

namespace {

// Model-internal 3D unit is meters; corpora and metrics use millimeters.
constexpr double kMmToM = 1e-3;

std::uint64_t step_seed(std::uint64_t run_seed, long step) {
  return derive_seed(run_seed, 0x57E9, static_cast<std::uint64_t>(step));
}

ag::Matrix stack_anchor_inputs(const ContrastiveBatch& batch) {
  const int b = batch.size();
  const Eigen::Index rows_per = batch.anchors[0].data.rows();
  ag::Matrix x(static_cast<Eigen::Index>(b) * rows_per, 3);
  for (int i = 0; i < b; ++i) {
    x.middleRows(static_cast<Eigen::Index>(i) * rows_per, rows_per) = batch.anchors[i].data;
  }
  return x;
}

ag::Matrix stack_targets_m(const ContrastiveBatch& batch) {
  const int b = batch.size();
  const Eigen::Index rows_per = batch.targets_3d[0].data.rows();
  ag::Matrix t(static_cast<Eigen::Index>(b) * rows_per, 3);
  for (int i = 0; i < b; ++i) {
    t.middleRows(static_cast<Eigen::Index>(i) * rows_per, rows_per) =
        batch.targets_3d[i].data * kMmToM;
  }
  return t;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train.lr must be positive");
  if (batch_size < 1) throw ValidationError("train.batch_size must be at least 1");
  if (steps < 0) throw ValidationError("train.steps must be non-negative");
  if (weight_decay < 0.0) throw ValidationError("train.weight_decay must be non-negative");
  if (sequence_frames < 2) throw ValidationError("train.sequence_frames must be at least 2");
  if (sequence_frames > model.t_max) {
    throw ValidationError("train.sequence_frames exceeds model.t_max");
  }
  if (finetune_sigma < 0.0) throw ValidationError("train.finetune_sigma must be non-negative");
  loss.validate();
  if (stage == Stage::pretrain) corruption.validate(sequence_frames);
}

TrainConfig TrainConfig::profile(const std::string& name) {
  TrainConfig c;
  if (name == "tiny") {
    c.model.c_f = 64;
    c.model.heads = 4;
    c.model.l1 = 2;
    c.model.l2 = 1;
    c.model.l3 = 2;
    c.model.ff_mult = 2;
    c.model.align_dim = 32;
    c.model.t_max = 96;
    c.model.dropout = 0.0;
    c.sequence_frames = 27;
    c.batch_size = 8;
    c.lr = 0.001;
    // Window-mask bounds scaled to the short window (the full-scale bounds
    // are 30..80 on 243-frame sequences).
    c.corruption.window_min = 4;
    c.corruption.window_max = 9;
  } else if (name == "paper") {
    c.model.c_f = 128;
    c.model.heads = 8;
    c.model.l1 = 3;
    c.model.l2 = 2;
    c.model.l3 = 3;
    c.model.ff_mult = 4;
    c.model.align_dim = 64;
    c.model.t_max = 256;
    c.model.dropout = 0.1;
    c.sequence_frames = 243;
    c.batch_size = 16;
    c.lr = 0.0005;
    c.corruption.window_min = 30;
    c.corruption.window_max = 80;
  } else {
    throw ValidationError("unknown profile: " + name + " (expected tiny or paper)");
  }
  return c;
}

KeyValues TrainConfig::to_kv() const {
  KeyValues kv;
  kv.set("config_version", "1");
  kv.set("stage", stage == Stage::pretrain ? "pretrain" : "finetune");
  auto set_num = [&](const std::string& key, double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    kv.set(key, os.str());
  };
  set_num("train.lr", lr);
  kv.set("train.lr_schedule", lr_schedule == LrSchedule::constant ? "constant" : "cosine");
  set_num("train.lr_final_fraction", lr_final_fraction);
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.steps", std::to_string(steps));
  set_num("train.weight_decay", weight_decay);
  set_num("train.beta1", beta1);
  set_num("train.beta2", beta2);
  set_num("train.adam_eps", adam_eps);
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.sequence_frames", std::to_string(sequence_frames));
  kv.set("train.both_views", both_views ? "1" : "0");
  kv.set("train.log_every", std::to_string(log_every));
  kv.set("train.eval_every_epochs", std::to_string(eval_every_epochs));
  set_num("train.finetune_sigma", finetune_sigma);
  set_num("loss.tau", loss.tau);
  kv.set("loss.negatives", std::to_string(loss.negatives));
  set_num("loss.gamma", loss.gamma);
  set_num("loss.lambda_3d", loss.lambda_3d);
  set_num("loss.lambda_v", loss.lambda_v);
  set_num("loss.epsilon_smooth", loss.epsilon_smooth);
  kv.set("loss.reduction", loss.reduction == Reduction::mean ? "mean" : "sum");
  set_num("corrupt.joint_ratio", corruption.joint_ratio);
  set_num("corrupt.frame_ratio", corruption.frame_ratio);
  kv.set("corrupt.window_min", std::to_string(corruption.window_min));
  kv.set("corrupt.window_max", std::to_string(corruption.window_max));
  set_num("corrupt.sigma", corruption.sigma);
  set_num("corrupt.outlier_prob", corruption.outlier_prob);
  for (const auto& [key, value] : model.to_kv()) kv.set(key, value);
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig base;
  const std::vector<std::string> allowed = [] {
    TrainConfig d;
    const KeyValues defaults = d.to_kv();
    std::vector<std::string> keys;
    for (const auto& [key, value] : defaults.entries()) keys.push_back(key);
    return keys;
  }();
  const auto unknown = kv.unknown_keys(allowed);
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  const long version = kv.get_int("config_version", 1);
  if (version != 1) throw ValidationError("unsupported config_version");

  TrainConfig c;
  const std::string stage = kv.get_string("stage", "pretrain");
  if (stage == "pretrain") {
    c.stage = Stage::pretrain;
  } else if (stage == "finetune") {
    c.stage = Stage::finetune;
  } else {
    throw ValidationError("config key stage must be pretrain or finetune");
  }
  c.lr = kv.get_double("train.lr", c.lr);
  const std::string schedule = kv.get_string("train.lr_schedule", "constant");
  if (schedule == "constant") {
    c.lr_schedule = LrSchedule::constant;
  } else if (schedule == "cosine") {
    c.lr_schedule = LrSchedule::cosine;
  } else {
    throw ValidationError("config key train.lr_schedule must be constant or cosine");
  }
  c.lr_final_fraction = kv.get_double("train.lr_final_fraction", c.lr_final_fraction);
  c.batch_size = static_cast<int>(kv.get_int("train.batch_size", c.batch_size));
  c.steps = static_cast<int>(kv.get_int("train.steps", c.steps));
  c.weight_decay = kv.get_double("train.weight_decay", c.weight_decay);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.adam_eps = kv.get_double("train.adam_eps", c.adam_eps);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.sequence_frames = static_cast<int>(kv.get_int("train.sequence_frames", c.sequence_frames));
  c.both_views = kv.get_bool("train.both_views", c.both_views);
  c.log_every = static_cast<int>(kv.get_int("train.log_every", c.log_every));
  c.eval_every_epochs =
      static_cast<int>(kv.get_int("train.eval_every_epochs", c.eval_every_epochs));
  c.finetune_sigma = kv.get_double("train.finetune_sigma", c.finetune_sigma);
  c.loss.tau = kv.get_double("loss.tau", c.loss.tau);
  c.loss.negatives = static_cast<int>(kv.get_int("loss.negatives", c.loss.negatives));
  c.loss.gamma = kv.get_double("loss.gamma", c.loss.gamma);
  c.loss.lambda_3d = kv.get_double("loss.lambda_3d", c.loss.lambda_3d);
  c.loss.lambda_v = kv.get_double("loss.lambda_v", c.loss.lambda_v);
  c.loss.epsilon_smooth = kv.get_double("loss.epsilon_smooth", c.loss.epsilon_smooth);
  const std::string reduction = kv.get_string("loss.reduction", "mean");
  if (reduction == "mean") {
    c.loss.reduction = Reduction::mean;
  } else if (reduction == "sum") {
    c.loss.reduction = Reduction::sum;
  } else {
    throw ValidationError("config key loss.reduction must be mean or sum");
  }
  c.corruption.joint_ratio = kv.get_double("corrupt.joint_ratio", c.corruption.joint_ratio);
  c.corruption.frame_ratio = kv.get_double("corrupt.frame_ratio", c.corruption.frame_ratio);
  c.corruption.window_min =
      static_cast<int>(kv.get_int("corrupt.window_min", c.corruption.window_min));
  c.corruption.window_max =
      static_cast<int>(kv.get_int("corrupt.window_max", c.corruption.window_max));
  c.corruption.sigma = kv.get_double("corrupt.sigma", c.corruption.sigma);
  c.corruption.outlier_prob = kv.get_double("corrupt.outlier_prob", c.corruption.outlier_prob);

  std::map<std::string, std::string> model_kv = base.model.to_kv();
  for (auto& [key, value] : model_kv) {
    if (kv.has(key)) value = kv.get_string(key);
  }
  // vocab_size is derived from the tokenizer at model construction.
  model_kv["model.vocab_size"] =
      kv.has("model.vocab_size") ? kv.get_string("model.vocab_size") : "0";
  c.model = ModelConfig::from_kv(model_kv);
  return c;
}

int TrainConfig::epoch_steps(const Corpus& corpus) const {
  const int anchors = static_cast<int>(corpus.clips.size()) * (both_views ? 2 : 1);
  return std::max(1, anchors / std::max(1, batch_size));
}

// ---------------------------------------------------------------------------
// log

void TrainLog::write(const std::string& path, std::uint64_t run_seed,
                     double wall_seconds) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write train log: " + path);
  os << "# actionpose train log v1\n";
  os << "# started_at " << iso_timestamp() << "\n";
  os << "# run_seed " << run_seed << "\n";
  os << std::setprecision(17);
  for (const auto& s : steps) {
    os << "step " << s.step << " con " << s.l_con << " l3d " << s.l_3d << " lv " << s.l_v
       << " total " << s.total << "\n";
  }
  for (const auto& [step, report] : epoch_evals) {
    os << "epoch_eval step " << step << " mpjpe_mm " << report.mpjpe_mm << " p_mpjpe_mm "
       << report.p_mpjpe_mm << " pck_percent " << report.pck_percent << " auc_percent "
       << report.auc_percent << "\n";
  }
  os << "# l_con_evaluations " << l_con_evaluations << "\n";
  os << "# clamp_events " << clamp_events << "\n";
  os << "# wall_seconds " << wall_seconds << "\n";
}

// ---------------------------------------------------------------------------
// optimizer

AdamW::AdamW(std::vector<ag::Parameter*> params, double lr, double beta1, double beta2,
             double eps, double weight_decay)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      weight_decay_(weight_decay) {
  for (auto* p : params_) {
    if (p->adam_m.size() == 0) {
      p->adam_m = ag::Matrix::Zero(p->value.rows(), p->value.cols());
      p->adam_v = ag::Matrix::Zero(p->value.rows(), p->value.cols());
    }
  }
}

double scheduled_lr(const TrainConfig& config, long step) {
  if (config.lr_schedule == LrSchedule::constant || config.steps <= 1) return config.lr;
  const double progress = static_cast<double>(step - 1) / (config.steps - 1);
  const double floor_lr = config.lr * config.lr_final_fraction;
  return floor_lr + 0.5 * (config.lr - floor_lr) * (1.0 + std::cos(progress * std::numbers::pi));
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (auto* p : params_) {
    p->adam_m = beta1_ * p->adam_m + (1.0 - beta1_) * p->grad;
    p->adam_v = beta2_ * p->adam_v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    const ag::Matrix m_hat = p->adam_m / bc1;
    const ag::Matrix v_hat = p->adam_v / bc2;
    p->value -=
        lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_) + weight_decay_ * p->value.array())
            .matrix();
  }
}

// ---------------------------------------------------------------------------
// pretraining graph

PretrainGraph build_pretrain_graph(ag::Tape& tape, ActionPoseModel& model,
                                   const ContrastiveBatch& batch, const LossConfig& loss_cfg,
                                   bool train, Rng* dropout_rng) {
  const int b = batch.size();
  if (b == 0) throw ValidationError("build_pretrain_graph: empty batch");
  const int frames = batch.anchors[0].frames;
  const int joints = batch.anchors[0].joints();
  const int k = static_cast<int>(batch.negatives[0].size());

  ActionPoseModel::PoseBatch pose_batch{b, frames, stack_anchor_inputs(batch)};
  const auto taps = model.pose_encode(tape, pose_batch, train, dropout_rng);
  ag::Node* h_p = model.pool_pose(tape, taps.mid, b);

  // Encode each distinct candidate text once; score rows gather from the
  // stacked unique embeddings.
  std::map<std::vector<std::int32_t>, int> unique;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx(b, k + 1);
  std::vector<const std::vector<std::int32_t>*> ordered;
  for (int i = 0; i < b; ++i) {
    const auto candidates = batch.candidates(i);
    for (int c = 0; c <= k; ++c) {
      const auto it = unique.find(candidates[c]);
      int u;
      if (it == unique.end()) {
        u = static_cast<int>(unique.size());
        unique.emplace(candidates[c], u);
      } else {
        u = it->second;
      }
      idx(i, c) = u;
    }
  }
  ordered.resize(unique.size());
  for (const auto& [tokens, u] : unique) ordered[u] = &tokens;
  std::vector<ag::Node*> pooled;
  pooled.reserve(ordered.size());
  for (const auto* tokens : ordered) {
    ag::Node* feats = model.text_encode(tape, *tokens, train, dropout_rng);
    pooled.push_back(model.pool_text(tape, feats, train, dropout_rng));
  }
  ag::Node* h_w = tape.concat_rows(pooled);

  PretrainGraph g;
  ag::Node* scores = tape.gather_dot_scores(h_p, h_w, idx, 1.0 / loss_cfg.tau);
  g.l_con = tape.focal_kl_from_logits(scores, batch.targets_y, loss_cfg.gamma,
                                      loss_cfg.reduction, &g.clamped);

  ag::Node* pred = model.regress_3d(tape, taps.final, b, frames);
  const ag::Matrix targets = stack_targets_m(batch);
  g.l_3d = tape.distance_loss(pred, targets, loss_cfg.reduction);
  g.l_v = tape.velocity_loss(pred, targets, b, frames, joints, loss_cfg.reduction);
  g.loss = tape.weighted_sum(
      {{g.l_con, 1.0}, {g.l_3d, loss_cfg.lambda_3d}, {g.l_v, loss_cfg.lambda_v}});
  return g;
}

// ---------------------------------------------------------------------------
// training loops

namespace {

BatchSampleOptions make_sample_options(const TrainConfig& config, const Tokenizer& tokenizer,
                                       bool with_corruption) {
  BatchSampleOptions opts;
  opts.batch_size = config.batch_size;
  opts.negatives = config.loss.negatives;
  opts.window_frames = config.sequence_frames;
  opts.label_smoothing = config.loss.epsilon_smooth;
  opts.both_views = config.both_views;
  opts.tokenize = [&tokenizer](const std::string& text) { return tokenizer.tokenize(text); };
  if (with_corruption) {
    const CorruptionConfig corruption = config.corruption;
    opts.corrupt = [corruption](const PoseSeq2D& seq, std::uint64_t seed) {
      return schedule_corruption(seq, seed, corruption);
    };
  } else if (config.finetune_sigma > 0.0) {
    const double sigma = config.finetune_sigma;
    opts.corrupt = [sigma](const PoseSeq2D& seq, std::uint64_t seed) {
      return std::make_pair(add_noise(seq, sigma, 0.0, seed), CorruptionRecord{});
    };
  }
  return opts;
}

void check_finite(double loss, std::uint64_t batch_seed, long step) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss at step " + std::to_string(step) +
                             "; replay with batch seed " + std::to_string(batch_seed),
                         batch_seed, step);
  }
}

void save_epoch_checkpoint(const ActionPoseModel& model,
                           const std::optional<std::string>& out_dir) {
  if (!out_dir) return;
  model.save_checkpoint(
      (std::filesystem::path(*out_dir) / "checkpoint_epoch.ckpt").string());
}

}  // namespace

TrainLog pretrain(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config,
                  const std::optional<std::string>& out_dir) {
  config.validate();
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  const BatchSampleOptions opts = make_sample_options(config, tokenizer, true);

  AdamW optimizer(model.parameters(), config.lr, config.beta1, config.beta2, config.adam_eps,
                  config.weight_decay);
  TrainLog log;
  const int per_epoch = config.epoch_steps(corpus);
  for (long step = 1; step <= config.steps; ++step) {
    const std::uint64_t batch_seed = step_seed(config.seed, step);
    const ContrastiveBatch batch = sample_contrastive_batch(corpus, opts, batch_seed);
    Rng dropout_rng(derive_seed(batch_seed, 0xD0));

    ag::Tape tape;
    const PretrainGraph g = build_pretrain_graph(tape, model, batch, config.loss, true,
                                                 &dropout_rng);
    ++log.l_con_evaluations;
    if (g.clamped) ++log.clamp_events;
    check_finite(g.loss->scalar(), batch_seed, step);

    for (auto* p : optimizer.params()) p->zero_grad();
    tape.backward(g.loss);
    optimizer.set_lr(scheduled_lr(config, step));
    optimizer.step();

    StepStats stats{step, g.l_con->scalar(), g.l_3d->scalar(), g.l_v->scalar(),
                    g.loss->scalar()};
    log.steps.push_back(stats);
    if (step % per_epoch == 0) {
      save_epoch_checkpoint(model, out_dir);
      const long epoch = step / per_epoch;
      if (config.eval_every_epochs > 0 && epoch % config.eval_every_epochs == 0) {
        log.epoch_evals.emplace_back(step, evaluate(model, corpus, config));
      }
    }
  }
  return log;
}

namespace {

// Supervised 2D -> 3D pairs for fine-tuning; no text, no candidates.
struct LiftBatch {
  std::vector<PoseSeq2D> inputs;
  std::vector<PoseSeq3D> targets;  // root-centered, millimeters
};

LiftBatch sample_lift_batch(const Corpus& corpus, const TrainConfig& config,
                            std::uint64_t seed) {
  LiftBatch out;
  Rng pick(derive_seed(seed, 0xA11C));
  for (int b = 0; b < config.batch_size; ++b) {
    const LabeledClip& clip = corpus.clips[pick.below(corpus.clips.size())];
    if (clip.motion.frames < config.sequence_frames) {
      throw ValidationError("finetune: clip shorter than the training window");
    }
    const View view = config.both_views && pick.below(2) == 1 ? View::side : View::front;
    const int slack = clip.motion.frames - config.sequence_frames;
    const int start = slack > 0 ? pick.below_int(slack + 1) : 0;

    PoseSeq3D window;
    window.layout = clip.motion.layout;
    window.fps = clip.motion.fps;
    window.frames = config.sequence_frames;
    const int joints = clip.motion.joints();
    window.data = clip.motion.data.middleRows(
        static_cast<Eigen::Index>(start) * joints,
        static_cast<Eigen::Index>(config.sequence_frames) * joints);

    const PoseSeq2D projected = project_orthographic(window, view);
    PoseSeq2D input = normalize_to_pixels(projected, clip_bbox(projected));
    if (config.finetune_sigma > 0.0) {
      input = add_noise(input, config.finetune_sigma, 0.0, derive_seed(seed, 0xC0, b));
    }
    out.inputs.push_back(std::move(input));
    out.targets.push_back(root_center(window));
  }
  return out;
}

}  // namespace

TrainLog finetune(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config,
                  const std::optional<std::string>& out_dir) {
  config.validate();
  std::vector<ag::Parameter*> trainable;
  for (auto* p : model.parameters()) {
    if (ActionPoseModel::is_finetuned_param(p->name)) trainable.push_back(p);
  }
  AdamW optimizer(trainable, config.lr, config.beta1, config.beta2, config.adam_eps,
                  config.weight_decay);

  TrainLog log;
  const int per_epoch = config.epoch_steps(corpus);
  for (long step = 1; step <= config.steps; ++step) {
    const std::uint64_t batch_seed = step_seed(config.seed, step);
    const LiftBatch batch = sample_lift_batch(corpus, config, batch_seed);
    Rng dropout_rng(derive_seed(batch_seed, 0xD0));

    const int b = static_cast<int>(batch.inputs.size());
    const int frames = batch.inputs[0].frames;
    const int joints = batch.inputs[0].joints();
    const Eigen::Index rows_per = batch.inputs[0].data.rows();
    ag::Matrix x(static_cast<Eigen::Index>(b) * rows_per, 3);
    ag::Matrix targets(static_cast<Eigen::Index>(b) * rows_per, 3);
    for (int i = 0; i < b; ++i) {
      x.middleRows(static_cast<Eigen::Index>(i) * rows_per, rows_per) = batch.inputs[i].data;
      targets.middleRows(static_cast<Eigen::Index>(i) * rows_per, rows_per) =
          batch.targets[i].data * kMmToM;
    }

    ag::Tape tape;
    ActionPoseModel::PoseBatch pose_batch{b, frames, std::move(x)};
    const auto taps = model.pose_encode(tape, pose_batch, true, &dropout_rng);
    ag::Node* pred = model.regress_3d(tape, taps.final, b, frames);
    ag::Node* l_3d = tape.distance_loss(pred, targets, config.loss.reduction);
    ag::Node* l_v = tape.velocity_loss(pred, targets, b, frames, joints, config.loss.reduction);
    ag::Node* loss =
        tape.weighted_sum({{l_3d, config.loss.lambda_3d}, {l_v, config.loss.lambda_v}});
    check_finite(loss->scalar(), batch_seed, step);

    for (auto* p : model.parameters()) p->zero_grad();
    tape.backward(loss);
    optimizer.set_lr(scheduled_lr(config, step));
    optimizer.step();

    log.steps.push_back({step, 0.0, l_3d->scalar(), l_v->scalar(), loss->scalar()});
    if (step % per_epoch == 0) {
      save_epoch_checkpoint(model, out_dir);
      const long epoch = step / per_epoch;
      if (config.eval_every_epochs > 0 && epoch % config.eval_every_epochs == 0) {
        log.epoch_evals.emplace_back(step, evaluate(model, corpus, config));
      }
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

struct EvalItem {
  const LabeledClip* clip;
  View view;
};

PoseSeq3D center_window(const PoseSeq3D& motion, int frames) {
  const int len = std::min(frames, motion.frames);
  const int start = (motion.frames - len) / 2;
  PoseSeq3D window;
  window.layout = motion.layout;
  window.fps = motion.fps;
  window.frames = len;
  const int joints = motion.joints();
  window.data = motion.data.middleRows(static_cast<Eigen::Index>(start) * joints,
                                       static_cast<Eigen::Index>(len) * joints);
  return window;
}

PoseSeq2D eval_input(const PoseSeq3D& window, View view) {
  const PoseSeq2D projected = project_orthographic(window, view);
  return normalize_to_pixels(projected, clip_bbox(projected));
}

}  // namespace

EvalReport evaluate(ActionPoseModel& model, const Corpus& corpus, const TrainConfig& config) {
  if (corpus.clips.empty()) throw ValidationError("evaluate: empty corpus");
  std::vector<EvalItem> items;
  for (const auto& clip : corpus.clips) {
    items.push_back({&clip, View::front});
    if (config.both_views) items.push_back({&clip, View::side});
  }
  EvalReport report;
  report.per_clip.resize(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = items[i];
    const PoseSeq3D window = center_window(item.clip->motion, config.sequence_frames);
    const PoseSeq2D input = eval_input(window, item.view);
    PoseSeq3D pred = window;  // layout/fps/frames metadata
    pred.data = model.predict_3d(input) / kMmToM;
    const PoseSeq3D pred_centered = root_center(pred);
    const PoseSeq3D gt_centered = root_center(window);

    EvalReport::Item& out = report.per_clip[i];
    out.clip_id = std::to_string(item.clip->id);
    out.view = to_string(item.view);
    out.mpjpe_mm = mpjpe(pred_centered, gt_centered);
    out.p_mpjpe_mm = p_mpjpe(pred_centered, gt_centered);
    out.pck_percent = pck(pred_centered, gt_centered);
    out.auc_percent = auc(pred_centered, gt_centered);
  });
  for (const auto& item : report.per_clip) {
    report.mpjpe_mm += item.mpjpe_mm;
    report.p_mpjpe_mm += item.p_mpjpe_mm;
    report.pck_percent += item.pck_percent;
    report.auc_percent += item.auc_percent;
  }
  const double n = static_cast<double>(report.per_clip.size());
  report.mpjpe_mm /= n;
  report.p_mpjpe_mm /= n;
  report.pck_percent /= n;
  report.auc_percent /= n;
  return report;
}

double retrieval_top1(ActionPoseModel& model, const Corpus& corpus,
                      const TrainConfig& config) {
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  std::vector<EvalItem> items;
  for (const auto& clip : corpus.clips) {
    items.push_back({&clip, View::front});
    if (config.both_views) items.push_back({&clip, View::side});
  }
  std::vector<std::uint8_t> hits(items.size(), 0);
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = items[i];
    const PoseSeq3D window = center_window(item.clip->motion, config.sequence_frames);
    PoseSeq2D input = eval_input(window, item.view);
    if (config.stage == Stage::pretrain) {
      // Anchors are corrupted during pretraining; rank under the same input
      // distribution, with a seed fixed per item.
      input = schedule_corruption(input, derive_seed(config.seed, 0xAE7, i),
                                  config.corruption)
                  .first;
    }
    const Eigen::RowVectorXd h_p = model.embed_pose(input).row(0);

    const auto pool = corpus.labels_of_other_classes(item.clip->action_class);
    if (static_cast<int>(pool.size()) < config.loss.negatives) {
      throw ValidationError("retrieval_top1: not enough negative labels");
    }
    Rng rng(derive_seed(config.seed, 0x3E7, i));
    const auto pick = rng.sample_without_replacement(pool.size(), config.loss.negatives);

    auto score_text = [&](const std::string& text) {
      ag::Tape tape;
      ag::Node* feats = model.text_encode(tape, tokenizer.tokenize(text), false, nullptr);
      ag::Node* h_w = model.pool_text(tape, feats, false, nullptr);
      return h_p.dot(h_w->val.row(0));
    };
    const double positive = score_text(item.clip->label_text);
    bool top = true;
    for (const auto pi : pick) {
      if (score_text(pool[pi]) >= positive) {
        top = false;
        break;
      }
    }
    hits[i] = top ? 1 : 0;
  });
  double total = 0.0;
  for (const auto h : hits) total += h;
  return total / static_cast<double>(hits.size());
}

std::string histogram_summary(const Corpus& corpus) {
  std::map<std::string, int> counts;
  for (const auto& clip : corpus.clips) counts[to_string(clip.action_class)]++;
  std::ostringstream os;
  os << "classes:";
  for (const auto& [name, count] : counts) os << ' ' << name << '=' << count;
  return os.str();
}

}  // namespace actionpose
