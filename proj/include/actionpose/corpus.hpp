// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "actionpose/corruption.hpp"
#include "actionpose/skeleton.hpp"

namespace actionpose {

// The ten motion classes of the procedural generator, plus Transition for
// blended clips labeled with the "transit from A to B" template.
enum class ActionClass : int {
  Walk = 0,
  Run,
  Jump,
  Wave,
  Kick,
  Bend,
  Raise,
  Throw,
  Pick,
  Stand,
  Transition,
};

constexpr int kNumMotionClasses = 10;

const char* to_string(ActionClass c);
ActionClass action_class_from_string(const std::string& name);  // throws on unknown

// The 2-3 templated phrasings of one motion class.
std::vector<std::string> label_phrases(ActionClass c);
// Every word that can appear in a generated label (including transition
// template words); basis of the model vocabulary.
std::vector<std::string> generator_vocabulary();

// Standing pelvis height of the procedural skeleton, millimeters.
double standing_pelvis_height_mm();

struct LabeledClip {
  PoseSeq3D motion;
  std::string label_text;
  ActionClass action_class = ActionClass::Stand;
  std::uint64_t seed = 0;
  std::uint32_t id = 0;
};

// Procedural clip from documented parametric joint-angle curves, driven by
// forward kinematics so bone lengths are constant over time by construction.
// Regeneration from (action_class, duration, seed) is bit-identical.
LabeledClip generate_motion(ActionClass cls, int duration_frames, std::uint64_t seed);

// Exact template "transit from {A} to {B}".
std::string build_transition_label(const std::string& label_a, const std::string& label_b);

// Temporal concatenation of a then b (length T_a + T_b). The last
// blend_frames frames of a are replaced by
//   (1 - alpha) * a[t] + alpha * b[0],  alpha = (t - (T_a - blend)) + 1) / (blend + 1),
// so the output starts at a's first frame and ends at b's last frame.
LabeledClip make_transition_clip(const LabeledClip& a, const LabeledClip& b, int blend_frames);

struct Corpus {
  std::shared_ptr<const SkeletonLayout> layout;
  std::vector<LabeledClip> clips;
  double fps = 30.0;

  // Distinct label texts of every clip whose class differs from cls.
  std::vector<std::string> labels_of_other_classes(ActionClass cls) const;
};

struct CorpusSpec {
  // Exact per-class clip counts; emitted counts match this histogram.
  std::vector<std::pair<ActionClass, int>> histogram;
  int frames = 64;
  int transition_clips = 0;  // extra blended clips appended after the base set
  std::uint64_t seed = 0;

  static CorpusSpec balanced(int num_classes, int clips_per_class, int frames,
                             std::uint64_t seed);
};

Corpus generate_corpus(const CorpusSpec& spec);

// Directory layout: layout.txt, manifest.tsv, clips/clip_%05u.mot. Each .mot
// file is three little-endian uint32 (T, J, C=3) followed by T*J*C
// little-endian float32 values in (frame, joint, channel) order.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

// One pretraining batch: corrupted 2D anchors with their replayable records,
// root-centered 3D targets, tokenized positive/negative labels, and the
// target distribution over the K+1 candidates per anchor.
struct ContrastiveBatch {
  std::vector<PoseSeq2D> anchors;
  std::vector<CorruptionRecord> records;
  std::vector<PoseSeq3D> targets_3d;  // root-centered, millimeters
  std::vector<std::vector<std::int32_t>> positives;
  std::vector<std::vector<std::vector<std::int32_t>>> negatives;  // K per anchor
  Eigen::MatrixXd targets_y;       // B x (K+1), rows sum to 1
  std::vector<int> positive_index; // slot of the positive among the K+1 candidates
  std::vector<std::uint32_t> clip_ids;
  std::vector<View> views;

  int size() const { return static_cast<int>(anchors.size()); }
  // Candidate token sequences of anchor b in scoring order (positive placed
  // at positive_index[b]).
  std::vector<std::vector<std::int32_t>> candidates(int b) const;
};

using TokenizeFn = std::function<std::vector<std::int32_t>(const std::string&)>;
using CorruptFn =
    std::function<std::pair<PoseSeq2D, CorruptionRecord>(const PoseSeq2D&, std::uint64_t)>;

struct BatchSampleOptions {
  int batch_size = 16;
  int negatives = 16;  // K
  int window_frames = 27;
  double label_smoothing = 0.0;
  bool both_views = true;  // sample the view per anchor; otherwise front only
  TokenizeFn tokenize;     // required
  CorruptFn corrupt;       // optional; identity when empty
};

// Per anchor: one positive (the clip's own label) plus K negatives sampled
// uniformly without replacement from the distinct labels of other classes.
ContrastiveBatch sample_contrastive_batch(const Corpus& corpus,
                                          const BatchSampleOptions& opts,
                                          std::uint64_t seed);

}  // namespace actionpose
