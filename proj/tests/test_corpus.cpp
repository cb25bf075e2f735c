// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "actionpose/corpus.hpp"
#include "actionpose/model.hpp"

using namespace actionpose;

namespace {

// Per-frame bone lengths from the kinematic tree.
Eigen::VectorXd bone_lengths(const PoseSeq3D& motion, int frame) {
  const auto& layout = *motion.layout;
  Eigen::VectorXd lengths(layout.joint_count() - 1);
  int at = 0;
  for (int j = 1; j < layout.joint_count(); ++j) {
    lengths(at++) = (motion.joint(frame, j) - motion.joint(frame, layout.parent_of[j])).norm();
  }
  return lengths;
}

}  // namespace

TEST_CASE("generation is bit-identical for the same (class, duration, seed)") {
  const LabeledClip a = generate_motion(ActionClass::Walk, 64, 7);
  const LabeledClip b = generate_motion(ActionClass::Walk, 64, 7);
  CHECK(a.motion.data == b.motion.data);
  CHECK(a.label_text == b.label_text);
  const LabeledClip c = generate_motion(ActionClass::Walk, 64, 8);
  CHECK(a.motion.data != c.motion.data);
}

TEST_CASE("bone lengths are constant over time") {
  for (int cls = 0; cls < kNumMotionClasses; ++cls) {
    const LabeledClip clip = generate_motion(static_cast<ActionClass>(cls), 48, 3);
    const Eigen::VectorXd first = bone_lengths(clip.motion, 0);
    for (int t = 1; t < clip.motion.frames; ++t) {
      const Eigen::VectorXd now = bone_lengths(clip.motion, t);
      const double rel = (now - first).cwiseAbs().maxCoeff() / first.maxCoeff();
      CHECK(rel < 1e-6);
    }
  }
}

TEST_CASE("jump pelvis trace has a local maximum above standing height") {
  const LabeledClip clip = generate_motion(ActionClass::Jump, 64, 11);
  const double standing = standing_pelvis_height_mm();
  bool found = false;
  for (int t = 1; t + 1 < clip.motion.frames; ++t) {
    const double prev = clip.motion.joint(t - 1, 0)(1);
    const double cur = clip.motion.joint(t, 0)(1);
    const double next = clip.motion.joint(t + 1, 0)(1);
    if (cur > prev && cur >= next && cur > standing) found = true;
  }
  CHECK(found);
}

TEST_CASE("generate_motion validates its inputs") {
  CHECK_THROWS_AS(generate_motion(ActionClass::Transition, 64, 0), ValidationError);
  CHECK_THROWS_AS(generate_motion(ActionClass::Walk, 8, 0), ValidationError);
}

TEST_CASE("transition label template") {
  CHECK(build_transition_label("walk", "jump") == "transit from walk to jump");
  CHECK(build_transition_label("bend down", "stand") == "transit from bend down to stand");
  CHECK(build_transition_label("walk", "jump") != build_transition_label("jump", "walk"));
  CHECK_THROWS_AS(build_transition_label("", "jump"), ValidationError);
}

TEST_CASE("transition clip blending") {
  const LabeledClip a = generate_motion(ActionClass::Walk, 32, 1);
  const LabeledClip b = generate_motion(ActionClass::Jump, 40, 2);

  SUBCASE("zero blend is pure concatenation") {
    const LabeledClip t = make_transition_clip(a, b, 0);
    CHECK(t.motion.frames == 72);
    CHECK(t.motion.data.topRows(a.motion.data.rows()) == a.motion.data);
    CHECK(t.motion.data.bottomRows(b.motion.data.rows()) == b.motion.data);
  }

  SUBCASE("boundaries and cross-fade") {
    const int blend = 8;
    const LabeledClip t = make_transition_clip(a, b, blend);
    CHECK(t.motion.frames == 72);
    CHECK(t.motion.data.topRows(kNumJoints) == a.motion.data.topRows(kNumJoints));
    CHECK(t.motion.data.bottomRows(kNumJoints) == b.motion.data.bottomRows(kNumJoints));
    // Mid-blend frame follows the documented convex combination.
    const int ta = a.motion.frames;
    const int t_mid = ta - blend + 3;
    const double alpha = static_cast<double>(t_mid - (ta - blend) + 1) / (blend + 1);
    const Eigen::MatrixXd expected =
        (1.0 - alpha) * a.motion.data.middleRows(static_cast<Eigen::Index>(t_mid) * kNumJoints,
                                                 kNumJoints) +
        alpha * b.motion.data.topRows(kNumJoints);
    const Eigen::MatrixXd actual =
        t.motion.data.middleRows(static_cast<Eigen::Index>(t_mid) * kNumJoints, kNumJoints);
    CHECK((actual - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.label_text == build_transition_label(a.label_text, b.label_text));
    CHECK(t.action_class == ActionClass::Transition);
  }

  SUBCASE("blend longer than a clip is rejected") {
    CHECK_THROWS_AS(make_transition_clip(a, b, 32), ValidationError);
  }
}

TEST_CASE("histogram counts are reproduced exactly") {
  CorpusSpec spec;
  spec.histogram = {{ActionClass::Walk, 5}, {ActionClass::Run, 1}, {ActionClass::Jump, 3}};
  spec.frames = 32;
  spec.seed = 5;
  const Corpus corpus = generate_corpus(spec);
  int walk = 0, run = 0, jump = 0;
  for (const auto& clip : corpus.clips) {
    walk += clip.action_class == ActionClass::Walk;
    run += clip.action_class == ActionClass::Run;
    jump += clip.action_class == ActionClass::Jump;
  }
  CHECK(walk == 5);
  CHECK(run == 1);
  CHECK(jump == 3);
  CHECK(corpus.clips.size() == 9);
}

TEST_CASE("corpus regeneration is bit-identical and survives save/load") {
  const CorpusSpec spec = CorpusSpec::balanced(4, 3, 32, 21);
  const Corpus a = generate_corpus(spec);
  const Corpus b = generate_corpus(spec);
  REQUIRE(a.clips.size() == b.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    CHECK(a.clips[i].motion.data == b.clips[i].motion.data);
    CHECK(a.clips[i].label_text == b.clips[i].label_text);
  }

  const std::string dir = "corpus_roundtrip";
  save_corpus(a, dir);
  const Corpus loaded = load_corpus(dir);
  REQUIRE(loaded.clips.size() == a.clips.size());
  for (std::size_t i = 0; i < a.clips.size(); ++i) {
    CHECK(loaded.clips[i].label_text == a.clips[i].label_text);
    CHECK(loaded.clips[i].action_class == a.clips[i].action_class);
    CHECK(loaded.clips[i].motion.frames == a.clips[i].motion.frames);
    // Clip tensors are stored as float32.
    const Eigen::MatrixXd diff = loaded.clips[i].motion.data - a.clips[i].motion.data;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-3);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("saving the same corpus twice is byte-identical") {
  const Corpus corpus = generate_corpus(CorpusSpec::balanced(3, 2, 24, 9));
  const std::string dir_a = "corpus_bytes_a", dir_b = "corpus_bytes_b";
  save_corpus(corpus, dir_a);
  save_corpus(corpus, dir_b);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir_a);
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(std::filesystem::path(dir_b) / rel, std::ios::binary);
    const std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(a == b);
    CHECK(!a.empty());
  }
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("contrastive batch: candidate counts, one-hot targets, distinct negatives") {
  const Corpus corpus = generate_corpus(CorpusSpec::balanced(8, 4, 48, 33));
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  BatchSampleOptions opts;
  opts.batch_size = 6;
  opts.negatives = 16;
  opts.window_frames = 27;
  opts.tokenize = [&](const std::string& s) { return tokenizer.tokenize(s); };

  const ContrastiveBatch batch = sample_contrastive_batch(corpus, opts, 99);
  CHECK(batch.size() == 6);
  for (int b = 0; b < batch.size(); ++b) {
    const auto candidates = batch.candidates(b);
    CHECK(candidates.size() == 17);
    CHECK(candidates[batch.positive_index[b]] == batch.positives[b]);
    // one-hot targets
    CHECK(batch.targets_y.row(b).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(batch.targets_y(b, batch.positive_index[b]) == 1.0);
    // negatives must be distinct and differ from the positive
    std::set<std::vector<std::int32_t>> seen;
    for (const auto& neg : batch.negatives[b]) {
      CHECK(neg != batch.positives[b]);
      CHECK(!seen.count(neg));
      seen.insert(neg);
    }
    // anchors are normalized windows of the configured length
    CHECK(batch.anchors[b].frames == 27);
    CHECK(batch.targets_3d[b].frames == 27);
    CHECK(batch.targets_3d[b].joint(5, 0).norm() == 0.0);  // root-centered
  }
}

TEST_CASE("label smoothing spreads epsilon over the negatives") {
  const Corpus corpus = generate_corpus(CorpusSpec::balanced(8, 2, 48, 1));
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  BatchSampleOptions opts;
  opts.batch_size = 3;
  opts.negatives = 8;
  opts.window_frames = 16;
  opts.label_smoothing = 0.1;
  opts.tokenize = [&](const std::string& s) { return tokenizer.tokenize(s); };
  const ContrastiveBatch batch = sample_contrastive_batch(corpus, opts, 4);
  for (int b = 0; b < batch.size(); ++b) {
    CHECK(batch.targets_y.row(b).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(batch.targets_y(b, batch.positive_index[b]) == doctest::Approx(0.9));
    for (int i = 0; i <= 8; ++i) {
      if (i != batch.positive_index[b]) {
        CHECK(batch.targets_y(b, i) == doctest::Approx(0.1 / 8));
      }
    }
  }
}

TEST_CASE("batch sampling rejects a corpus without enough distinct labels") {
  const Corpus corpus = generate_corpus(CorpusSpec::balanced(2, 2, 32, 3));
  const Tokenizer tokenizer = Tokenizer::for_generator_vocab();
  BatchSampleOptions opts;
  opts.batch_size = 4;
  opts.negatives = 16;  // only one other class exists -> at most 3 labels
  opts.window_frames = 16;
  opts.tokenize = [&](const std::string& s) { return tokenizer.tokenize(s); };
  CHECK_THROWS_AS(sample_contrastive_batch(corpus, opts, 0), ValidationError);
}

TEST_CASE("every label phrase is unique across classes") {
  std::set<std::string> seen;
  for (int c = 0; c < kNumMotionClasses; ++c) {
    for (const auto& phrase : label_phrases(static_cast<ActionClass>(c))) {
      CHECK(!seen.count(phrase));
      seen.insert(phrase);
    }
  }
}
