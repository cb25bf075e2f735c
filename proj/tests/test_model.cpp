// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "actionpose/corpus.hpp"
#include "actionpose/model.hpp"
#include "actionpose/trainer.hpp"
#include "test_util.hpp"

using namespace actionpose;
using test_util::random_matrix;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.c_f = 16;
  c.heads = 2;
  c.l1 = 2;
  c.l2 = 1;
  c.l3 = 2;
  c.ff_mult = 2;
  c.t_max = 16;
  c.align_dim = 8;
  c.vocab_size = Tokenizer::for_generator_vocab().vocab_size();
  return c;
}

ActionPoseModel::PoseBatch random_batch(Rng& rng, int batch, int frames) {
  ActionPoseModel::PoseBatch out;
  out.batch = batch;
  out.frames = frames;
  out.x = random_matrix(rng, static_cast<Eigen::Index>(batch) * frames * kNumJoints, 3, 0.5);
  out.x.col(2).setOnes();
  return out;
}

}  // namespace

TEST_CASE("tokenizer contract") {
  const Tokenizer tok = Tokenizer::for_generator_vocab();

  SUBCASE("single word") {
    const auto ids = tok.tokenize("walk");
    CHECK(ids.size() == 3);
    CHECK(ids.front() == Tokenizer::kCls);
    CHECK(ids.back() == Tokenizer::kSep);
  }

  SUBCASE("transition template has 7 tokens including specials") {
    CHECK(tok.tokenize("transit from walk to jump").size() == 7);
  }

  SUBCASE("round trip on in-vocabulary text") {
    for (int c = 0; c < kNumMotionClasses; ++c) {
      for (const auto& phrase : label_phrases(static_cast<ActionClass>(c))) {
        CHECK(tok.detokenize(tok.tokenize(phrase)) == phrase);
      }
    }
  }

  SUBCASE("unknown words map to <UNK>, empty text is rejected") {
    const auto ids = tok.tokenize("zzz walk");
    CHECK(ids[1] == Tokenizer::kUnk);
    CHECK_THROWS_AS(tok.tokenize(""), ValidationError);
    CHECK_THROWS_AS(tok.tokenize("   "), ValidationError);
  }

  SUBCASE("nothing can follow <SEP>") {
    const auto ids = tok.tokenize("walk forward");
    CHECK(ids.back() == Tokenizer::kSep);
    CHECK(std::count(ids.begin(), ids.end(), Tokenizer::kSep) == 1);
  }
}

TEST_CASE("config validation") {
  ModelConfig c = tiny_config();
  c.heads = 3;  // does not divide 16
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = tiny_config();
  c.l2 = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("parameter count matches the closed form") {
  const ModelConfig c = tiny_config();
  ActionPoseModel model(c, 1);
  CHECK(model.param_count() == ActionPoseModel::expected_param_count(c));

  ModelConfig big = c;
  big.c_f = 32;
  big.heads = 4;
  big.l1 = 3;
  big.l2 = 2;
  big.l3 = 3;
  big.ff_mult = 4;
  big.align_dim = 16;
  ActionPoseModel model2(big, 2);
  CHECK(model2.param_count() == ActionPoseModel::expected_param_count(big));
}

TEST_CASE("pose encoder output shapes at both taps") {
  ActionPoseModel model(tiny_config(), 3);
  Rng rng(1);
  const auto batch = random_batch(rng, 2, 5);
  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);
  CHECK(taps.mid->val.rows() == 2 * 6 * kNumJoints);
  CHECK(taps.mid->val.cols() == 16);
  CHECK(taps.final->val.rows() == 2 * 6 * kNumJoints);
  CHECK(taps.final->val.allFinite());
}

TEST_CASE("frame permutation equivariance with temporal encodings disabled") {
  ModelConfig c = tiny_config();
  c.use_temporal_pe = false;
  ActionPoseModel model(c, 4);
  Rng rng(2);
  const int frames = 5;
  auto batch = random_batch(rng, 1, frames);

  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);

  // Swap frames 1 and 3 of the input.
  auto swapped = batch;
  swapped.x.middleRows(1 * kNumJoints, kNumJoints) =
      batch.x.middleRows(3 * kNumJoints, kNumJoints);
  swapped.x.middleRows(3 * kNumJoints, kNumJoints) =
      batch.x.middleRows(1 * kNumJoints, kNumJoints);
  ag::Tape tape2;
  const auto taps2 = model.pose_encode(tape2, swapped, false, nullptr);

  // Outputs swap the matching frames (+1 for the <POSE> slot).
  const auto block = [&](const ag::Matrix& m, int t) {
    return m.middleRows(static_cast<Eigen::Index>(t) * kNumJoints, kNumJoints);
  };
  CHECK((block(taps2.final->val, 2) - block(taps.final->val, 4)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((block(taps2.final->val, 4) - block(taps.final->val, 2)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((block(taps2.final->val, 0) - block(taps.final->val, 0)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((block(taps2.final->val, 1) - block(taps.final->val, 1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("all-masked input still yields finite outputs") {
  ActionPoseModel model(tiny_config(), 5);
  ActionPoseModel::PoseBatch batch;
  batch.batch = 1;
  batch.frames = 4;
  batch.x = ag::Matrix::Zero(4 * kNumJoints, 3);
  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);
  CHECK(taps.final->val.allFinite());
  ag::Node* h = model.pool_pose(tape, taps.mid, 1);
  CHECK(h->val.allFinite());
}

TEST_CASE("pooled embeddings are unit-normalized with align_dim width") {
  ActionPoseModel model(tiny_config(), 6);
  Rng rng(3);
  const auto batch = random_batch(rng, 3, 6);
  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);
  ag::Node* h_p = model.pool_pose(tape, taps.mid, 3);
  CHECK(h_p->val.rows() == 3);
  CHECK(h_p->val.cols() == 8);
  for (int b = 0; b < 3; ++b) {
    CHECK(h_p->val.row(b).norm() == doctest::Approx(1.0).epsilon(1e-6));
  }

  const Tokenizer tok = Tokenizer::for_generator_vocab();
  ag::Node* feats = model.text_encode(tape, tok.tokenize("raise both arms"), false, nullptr);
  CHECK(feats->val.rows() == 5);
  CHECK(feats->val.cols() == 16);
  ag::Node* h_w = model.pool_text(tape, feats, false, nullptr);
  CHECK(h_w->val.rows() == 1);
  CHECK(h_w->val.cols() == 8);
  CHECK(h_w->val.row(0).norm() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("text encoding is deterministic in inference mode") {
  ActionPoseModel model(tiny_config(), 7);
  const Tokenizer tok = Tokenizer::for_generator_vocab();
  ag::Tape t1, t2;
  const auto ids = tok.tokenize("kick with the right leg");
  ag::Node* a = model.pool_text(t1, model.text_encode(t1, ids, false, nullptr), false, nullptr);
  ag::Node* b = model.pool_text(t2, model.text_encode(t2, ids, false, nullptr), false, nullptr);
  CHECK(a->val == b->val);
  CHECK_THROWS_AS(model.text_encode(t1, std::vector<std::int32_t>{Tokenizer::kCls}, false,
                                    nullptr),
                  ValidationError);
}

TEST_CASE("regression head shapes and zero-head behavior") {
  ActionPoseModel model(tiny_config(), 8);
  Rng rng(4);
  const auto batch = random_batch(rng, 2, 5);
  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);
  ag::Node* pred = model.regress_3d(tape, taps.final, 2, 5);
  CHECK(pred->val.rows() == 2 * 5 * kNumJoints);
  CHECK(pred->val.cols() == 3);
  CHECK(pred->val.allFinite());

  model.param("head.w").value.setZero();
  model.param("head.b").value.setZero();
  ag::Tape tape2;
  const auto taps2 = model.pose_encode(tape2, batch, false, nullptr);
  ag::Node* zero_pred = model.regress_3d(tape2, taps2.final, 2, 5);
  CHECK(zero_pred->val.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("changing pooling parameters does not change the regression output") {
  ActionPoseModel model(tiny_config(), 9);
  Rng rng(5);
  const auto batch = random_batch(rng, 1, 6);

  ag::Tape tape;
  const auto taps = model.pose_encode(tape, batch, false, nullptr);
  const ag::Matrix before = model.regress_3d(tape, taps.final, 1, 6)->val;

  Rng perturb(6);
  for (const char* name : {"pose_pool.l1.w", "pose_pool.joint_weight", "pose_pool.out.w",
                           "text_pool.l1.w", "text_pool.out.w"}) {
    auto& p = model.param(name);
    p.value += random_matrix(perturb, p.value.rows(), p.value.cols(), 0.3);
  }
  ag::Tape tape2;
  const auto taps2 = model.pose_encode(tape2, batch, false, nullptr);
  const ag::Matrix after = model.regress_3d(tape2, taps2.final, 1, 6)->val;
  CHECK(before == after);
}

TEST_CASE("every parameter receives gradient from the combined objective") {
  ModelConfig c = tiny_config();
  ActionPoseModel model(c, 10);
  const Corpus corpus = generate_corpus(CorpusSpec::balanced(8, 1, 24, 7));
  const Tokenizer tok = Tokenizer::for_generator_vocab();
  BatchSampleOptions opts;
  opts.batch_size = 4;
  opts.negatives = 6;
  opts.window_frames = 8;
  opts.tokenize = [&](const std::string& s) { return tok.tokenize(s); };
  const ContrastiveBatch batch = sample_contrastive_batch(corpus, opts, 11);

  LossConfig loss_cfg;
  loss_cfg.negatives = 6;
  ag::Tape tape;
  const PretrainGraph g = build_pretrain_graph(tape, model, batch, loss_cfg, true, nullptr);
  for (auto* p : model.parameters()) p->zero_grad();
  tape.backward(g.loss);
  for (auto* p : model.parameters()) {
    INFO("parameter ", p->name);
    CHECK(p->grad.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("checkpoint round trip: save -> load -> save is byte-identical") {
  const ModelConfig c = tiny_config();
  ActionPoseModel model(c, 12);
  const std::string p1 = "ckpt_a.bin", p2 = "ckpt_b.bin";
  model.save_checkpoint(p1);
  ActionPoseModel loaded = ActionPoseModel::load_checkpoint(p1);
  loaded.save_checkpoint(p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("incompatible checkpoints are rejected with the mismatched names") {
  ModelConfig c = tiny_config();
  ActionPoseModel model(c, 13);
  const std::string path = "ckpt_mismatch.bin";
  model.save_checkpoint(path);

  ModelConfig other = c;
  other.c_f = 32;
  other.heads = 4;
  ActionPoseModel target(other, 14);
  CHECK_THROWS_WITH_AS(target.load_parameters(path), doctest::Contains("pose.lift.w"),
                       ValidationError);
  std::remove(path.c_str());
}
