// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: corpus generation, pretraining, fine-tuning,
// evaluation, and embedding export. Every command is a pure function of
// (inputs, config, seed); reruns are byte-identical except timestamps,
// which live only in log headers.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actionpose/config.hpp"
#include "actionpose/corpus.hpp"
#include "actionpose/embedding.hpp"
#include "actionpose/errors.hpp"
#include "actionpose/model.hpp"
#include "actionpose/trainer.hpp"

namespace fs = std::filesystem;
using namespace actionpose;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::string checkpoint;
  std::string data_dir;
  std::string profile = "tiny";
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_checkpoint,
                      bool with_data) {
  cmd->add_option("--config", args.config_path, "Config file (flat key = value)");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Run seed (overrides config)");
  cmd->add_option("--steps", args.steps, "Training steps (overrides config)");
  cmd->add_option("--profile", args.profile, "Named profile: tiny or paper")
      ->check(CLI::IsMember({"tiny", "paper"}));
  cmd->add_option("--set", args.overrides, "Override any config key, e.g. --set loss.tau=0.2");
  if (with_checkpoint) {
    cmd->add_option("--checkpoint", args.checkpoint, "Model checkpoint path");
  }
  if (with_data) {
    cmd->add_option("--data", args.data_dir, "Corpus directory");
  }
}

TrainConfig resolve_config(const CommonArgs& args, Stage stage) {
  KeyValues kv = TrainConfig::profile(args.profile).to_kv();
  if (!args.config_path.empty()) {
    const KeyValues file = KeyValues::parse_file(args.config_path);
    for (const auto& [key, value] : file.entries()) kv.set(key, value);
  }
  for (const auto& assignment : args.overrides) kv.set_from_assignment(assignment);
  kv.set("stage", stage == Stage::pretrain ? "pretrain" : "finetune");
  TrainConfig config = TrainConfig::from_kv(kv);
  if (args.seed) config.seed = *args.seed;
  if (args.steps) config.steps = *args.steps;
  config.stage = stage;
  return config;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory: " + dir);
}

ActionPoseModel build_model(TrainConfig& config) {
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  config.model.vocab_size = tokenizer.vocab_size();
  return ActionPoseModel(config.model, derive_seed(config.seed, 0x10D3));
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonArgs& args, int classes, int clips_per_class, int frames,
                 int transitions, const std::string& histogram) {
  CorpusSpec spec;
  if (!histogram.empty()) {
    std::stringstream hs(histogram);
    std::string entry;
    while (std::getline(hs, entry, ',')) {
      const auto eq = entry.find('=');
      require(eq != std::string::npos, "histogram entries must be class=count");
      spec.histogram.emplace_back(action_class_from_string(entry.substr(0, eq)),
                                  std::stoi(entry.substr(eq + 1)));
    }
    spec.frames = frames;
    spec.seed = args.seed.value_or(0);
    spec.transition_clips = transitions;
  } else {
    spec = CorpusSpec::balanced(classes, clips_per_class, frames, args.seed.value_or(0));
    spec.transition_clips = transitions;
  }
  ensure_out_dir(args.out_dir);
  const Corpus corpus = generate_corpus(spec);
  save_corpus(corpus, args.out_dir);
  std::cout << histogram_summary(corpus) << "\n";
  std::cout << "wrote " << corpus.clips.size() << " clips to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_pretrain(const CommonArgs& args) {
  require(!args.data_dir.empty(), "missing required option --data (corpus directory)");
  TrainConfig config = resolve_config(args, Stage::pretrain);
  ensure_out_dir(args.out_dir);
  const Corpus corpus = load_corpus(args.data_dir);
  ActionPoseModel model = build_model(config);
  const auto start = std::chrono::steady_clock::now();
  const TrainLog log = pretrain(model, corpus, config, args.out_dir);
  model.save_checkpoint((fs::path(args.out_dir) / "checkpoint_final.ckpt").string());
  log.write((fs::path(args.out_dir) / "train_log.txt").string(), config.seed,
            elapsed_s(start));
  config.to_kv().write_file((fs::path(args.out_dir) / "resolved_config.cfg").string());
  std::cout << "pretrained " << config.steps << " steps; final total loss "
            << (log.steps.empty() ? 0.0 : log.steps.back().total) << "\n";
  return kExitOk;
}

int cmd_finetune(const CommonArgs& args) {
  require(!args.data_dir.empty(), "missing required option --data (corpus directory)");
  require(!args.checkpoint.empty(), "missing required option --checkpoint");
  TrainConfig config = resolve_config(args, Stage::finetune);
  ensure_out_dir(args.out_dir);
  const Corpus corpus = load_corpus(args.data_dir);
  ActionPoseModel model = build_model(config);
  model.load_parameters(args.checkpoint);
  const auto start = std::chrono::steady_clock::now();
  const TrainLog log = finetune(model, corpus, config, args.out_dir);
  model.save_checkpoint((fs::path(args.out_dir) / "checkpoint_final.ckpt").string());
  log.write((fs::path(args.out_dir) / "train_log.txt").string(), config.seed,
            elapsed_s(start));
  config.to_kv().write_file((fs::path(args.out_dir) / "resolved_config.cfg").string());
  std::cout << "fine-tuned " << config.steps << " steps; final loss "
            << (log.steps.empty() ? 0.0 : log.steps.back().total) << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args) {
  require(!args.data_dir.empty(), "missing required option --data (corpus directory)");
  require(!args.checkpoint.empty(), "missing required option --checkpoint");
  TrainConfig config = resolve_config(args, Stage::finetune);
  ensure_out_dir(args.out_dir);
  const Corpus corpus = load_corpus(args.data_dir);
  ActionPoseModel model = ActionPoseModel::load_checkpoint(args.checkpoint);
  const EvalReport report = evaluate(model, corpus, config);
  {
    std::ofstream text((fs::path(args.out_dir) / "eval_report.txt").string());
    if (!text) throw IoError("cannot write eval report");
    report.write_text(text);
  }
  {
    std::ofstream kv((fs::path(args.out_dir) / "eval_report.kv").string());
    if (!kv) throw IoError("cannot write eval report");
    report.write_kv(kv);
  }
  std::cout << "mpjpe_mm " << report.mpjpe_mm << " p_mpjpe_mm " << report.p_mpjpe_mm
            << " pck_percent " << report.pck_percent << " auc_percent " << report.auc_percent
            << "\n";
  return kExitOk;
}

int cmd_embed(const CommonArgs& args) {
  require(!args.data_dir.empty(), "missing required option --data (corpus directory)");
  require(!args.checkpoint.empty(), "missing required option --checkpoint");
  TrainConfig config = resolve_config(args, Stage::finetune);
  ensure_out_dir(args.out_dir);
  const Corpus corpus = load_corpus(args.data_dir);
  ActionPoseModel model = ActionPoseModel::load_checkpoint(args.checkpoint);
  const EmbeddingTable table = compute_embeddings(model, corpus, config);
  const Eigen::MatrixXd coords = pca_project_2d(table.h_p);
  write_embeddings_csv(table, (fs::path(args.out_dir) / "embeddings.csv").string());
  write_scatter_csv(table, coords, (fs::path(args.out_dir) / "embedding_scatter.csv").string());
  write_scatter_svg(table, coords, (fs::path(args.out_dir) / "embedding_scatter.svg").string());
  const CosineSeparation sep = cosine_separation(table);
  std::cout << "exported " << table.h_p.rows() << " embeddings; intra-class cosine "
            << sep.intra_class << " inter-class cosine " << sep.inter_class << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"actionpose: language-aligned masked-motion pretraining for 2D->3D lifting"};
  app.require_subcommand(1);

  CommonArgs gen_args, pre_args, fine_args, eval_args, embed_args;
  int classes = 8, clips_per_class = 8, frames = 64, transitions = 0;
  std::string histogram;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic labeled corpus");
  add_common_flags(gen, gen_args, false, false);
  gen->add_option("--classes", classes, "Number of action classes (first N of 10)");
  gen->add_option("--clips-per-class", clips_per_class, "Clips per class");
  gen->add_option("--frames", frames, "Frames per clip");
  gen->add_option("--transitions", transitions, "Extra transition clips");
  gen->add_option("--histogram", histogram,
                  "Exact per-class counts, e.g. walk=10,run=2 (overrides --classes)");

  CLI::App* pre = app.add_subcommand("pretrain", "Alignment + reconstruction pretraining");
  add_common_flags(pre, pre_args, false, true);
  CLI::App* fine = app.add_subcommand("finetune", "Fine-tune the pose encoder for lifting");
  add_common_flags(fine, fine_args, true, true);
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint (MPJPE, P-MPJPE, PCK, AUC)");
  add_common_flags(eval, eval_args, true, true);
  CLI::App* embed = app.add_subcommand("embed", "Export pose embeddings, PCA scatter and SVG");
  add_common_flags(embed, embed_args, true, true);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_gen_data(gen_args, classes, clips_per_class, frames, transitions, histogram);
    }
    if (pre->parsed()) return cmd_pretrain(pre_args);
    if (fine->parsed()) return cmd_finetune(fine_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (embed->parsed()) return cmd_embed(embed_args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
