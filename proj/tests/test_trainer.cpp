// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "actionpose/trainer.hpp"

using namespace actionpose;

namespace {

// A small but non-trivial setup shared by the trainer tests.
struct Fixture {
  TrainConfig config;
  Corpus corpus;

  Fixture() {
    config = TrainConfig::profile("tiny");
    config.model.c_f = 16;
    config.model.heads = 2;
    config.model.l3 = 1;
    config.model.align_dim = 8;
    config.model.t_max = 16;
    config.model.vocab_size = Tokenizer::for_generator_vocab().vocab_size();
    config.sequence_frames = 10;
    config.batch_size = 4;
    config.loss.negatives = 6;
    config.corruption.window_min = 2;
    config.corruption.window_max = 5;
    config.steps = 3;
    config.seed = 41;
    corpus = generate_corpus(CorpusSpec::balanced(8, 2, 32, 17));
  }

  ActionPoseModel make_model() const {
    return ActionPoseModel(config.model, derive_seed(config.seed, 0x10D3));
  }
};

bool params_equal(const ActionPoseModel& a, ActionPoseModel& b) {
  auto pa = a.parameters();
  for (const auto* p : pa) {
    if (b.param(p->name).value != p->value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config key-value round trip and validation") {
  TrainConfig config = TrainConfig::profile("tiny");
  config.seed = 123;
  config.loss.tau = 0.2;
  const KeyValues kv = config.to_kv();
  const TrainConfig back = TrainConfig::from_kv(kv);
  CHECK(back.seed == 123);
  CHECK(back.loss.tau == doctest::Approx(0.2));
  CHECK(back.model.c_f == config.model.c_f);
  CHECK(back.batch_size == config.batch_size);

  KeyValues bad = config.to_kv();
  bad.set("loss.tua", "0.5");
  CHECK_THROWS_WITH_AS(TrainConfig::from_kv(bad), doctest::Contains("loss.tua"),
                       ValidationError);

  KeyValues typo = config.to_kv();
  typo.set("loss.tau", "fast");
  CHECK_THROWS_WITH_AS(TrainConfig::from_kv(typo), doctest::Contains("loss.tau"),
                       ValidationError);

  CHECK_THROWS_AS(TrainConfig::profile("huge"), ValidationError);
}

TEST_CASE("config file parsing") {
  const std::string path = "trainer_test.cfg";
  {
    std::ofstream os(path);
    os << "# comment\n\nconfig_version = 1\ntrain.lr = 0.002\nloss.gamma = 1.5\n";
  }
  const KeyValues kv = KeyValues::parse_file(path);
  CHECK(kv.get_double("train.lr", 0.0) == doctest::Approx(0.002));
  CHECK(kv.get_double("loss.gamma", 0.0) == doctest::Approx(1.5));
  std::remove(path.c_str());
  CHECK_THROWS_AS(KeyValues::parse_file("missing.cfg"), IoError);
  CHECK_THROWS_AS(KeyValues::parse_text("just words\n"), ValidationError);
}

TEST_CASE("pretraining updates the text encoder even with zero reconstruction weights") {
  Fixture f;
  f.config.loss.lambda_3d = 0.0;
  f.config.loss.lambda_v = 0.0;
  f.config.steps = 1;
  ActionPoseModel model = f.make_model();
  const ag::Matrix before = model.param("text.block0.attn.q.w").value;
  pretrain(model, f.corpus, f.config);
  CHECK(model.param("text.block0.attn.q.w").value != before);
}

TEST_CASE("same seed reproduces the loss trajectory bit-identically") {
  Fixture f;
  f.config.steps = 5;
  ActionPoseModel m1 = f.make_model();
  ActionPoseModel m2 = f.make_model();
  const TrainLog l1 = pretrain(m1, f.corpus, f.config);
  const TrainLog l2 = pretrain(m2, f.corpus, f.config);
  REQUIRE(l1.steps.size() == l2.steps.size());
  for (std::size_t i = 0; i < l1.steps.size(); ++i) {
    CHECK(l1.steps[i].total == l2.steps[i].total);
    CHECK(l1.steps[i].l_con == l2.steps[i].l_con);
  }
  CHECK(params_equal(m1, m2));

  // A different seed diverges.
  TrainConfig other = f.config;
  other.seed = 42;
  ActionPoseModel m3 = f.make_model();
  const TrainLog l3 = pretrain(m3, f.corpus, other);
  CHECK(l3.steps[0].total != l1.steps[0].total);
}

TEST_CASE("fine-tuning freezes the text encoder and alignment pooling") {
  Fixture f;
  ActionPoseModel model = f.make_model();
  f.config.steps = 2;
  pretrain(model, f.corpus, f.config);

  // Snapshot the frozen groups byte-for-byte.
  std::vector<std::pair<std::string, ag::Matrix>> frozen;
  for (auto* p : model.parameters()) {
    if (!ActionPoseModel::is_finetuned_param(p->name)) frozen.emplace_back(p->name, p->value);
  }
  REQUIRE(!frozen.empty());

  TrainConfig fine = f.config;
  fine.stage = Stage::finetune;
  fine.steps = 3;
  const TrainLog log = finetune(model, f.corpus, fine);

  for (const auto& [name, value] : frozen) {
    INFO("parameter ", name);
    CHECK(model.param(name).value == value);
  }
  CHECK(log.l_con_evaluations == 0);

  // The gradient support during fine-tuning is exactly the trainable set.
  for (auto* p : model.parameters()) {
    INFO("parameter ", p->name);
    if (ActionPoseModel::is_finetuned_param(p->name)) {
      CHECK(p->grad.cwiseAbs().maxCoeff() > 0.0);
    } else {
      CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("pretraining touches every parameter in one optimizer step") {
  Fixture f;
  f.config.steps = 1;
  ActionPoseModel model = f.make_model();
  std::vector<std::pair<std::string, ag::Matrix>> before;
  for (auto* p : model.parameters()) before.emplace_back(p->name, p->value);
  pretrain(model, f.corpus, f.config);
  int changed = 0;
  for (const auto& [name, value] : before) {
    if (model.param(name).value != value) ++changed;
  }
  // Weight decay plus gradient updates move everything.
  CHECK(changed == static_cast<int>(before.size()));
}

TEST_CASE("evaluation is deterministic, zero for perfect predictions, schema-complete") {
  Fixture f;
  ActionPoseModel model = f.make_model();
  const EvalReport a = evaluate(model, f.corpus, f.config);
  const EvalReport b = evaluate(model, f.corpus, f.config);
  CHECK(a.mpjpe_mm == b.mpjpe_mm);
  CHECK(a.p_mpjpe_mm == b.p_mpjpe_mm);
  CHECK(a.per_clip.size() == f.corpus.clips.size() * 2);  // both views
  CHECK(a.mpjpe_mm > 0.0);  // a fresh random model cannot be perfect
  CHECK(a.p_mpjpe_mm <= a.mpjpe_mm + 1e-9);
  for (const auto& item : a.per_clip) {
    CHECK(item.pck_percent >= 0.0);
    CHECK(item.pck_percent <= 100.0);
    CHECK(item.auc_percent >= 0.0);
    CHECK(item.auc_percent <= 100.0);
  }
}

TEST_CASE("train log write honors the timestamp-only-in-headers rule") {
  Fixture f;
  f.config.steps = 2;
  ActionPoseModel model = f.make_model();
  const TrainLog log = pretrain(model, f.corpus, f.config);
  const std::string path = "trainer_log_test.txt";
  log.write(path, f.config.seed, 1.25);
  std::ifstream is(path);
  std::string line;
  int step_lines = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') continue;  // headers/footers may carry timestamps
    CHECK(line.rfind("step ", 0) == 0);
    ++step_lines;
  }
  CHECK(step_lines == 2);
  std::remove(path.c_str());
}

TEST_CASE("non-finite loss aborts with the offending batch seed") {
  Fixture f;
  f.config.steps = 1;
  ActionPoseModel model = f.make_model();
  model.param("head.w").value.setConstant(std::numeric_limits<double>::infinity());
  try {
    pretrain(model, f.corpus, f.config);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.step == 1);
    CHECK(e.batch_seed != 0);
  }
}

TEST_CASE("epoch checkpoints are written when an output directory is given") {
  Fixture f;
  f.config.steps = f.config.epoch_steps(f.corpus);
  ActionPoseModel model = f.make_model();
  const std::string dir = "trainer_out_test";
  std::filesystem::create_directories(dir);
  pretrain(model, f.corpus, f.config, dir);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "checkpoint_epoch.ckpt"));
  std::filesystem::remove_all(dir);
}
