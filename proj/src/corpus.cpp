// SPDX-License-Identifier: Apache-2.0
#include "actionpose/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "actionpose/binio.hpp"
#include "actionpose/parallel.hpp"
#include "actionpose/rng.hpp"

namespace actionpose {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rest-pose offsets from each joint's parent, millimeters. The skeleton is
// animated through forward kinematics over these fixed bones, so bone
// lengths are constant across frames by construction.
struct RestPose {
  Eigen::Matrix<double, kNumJoints, 3> offset;
  double pelvis_height;
};

const RestPose& rest_pose() {
  static const RestPose rp = [] {
    RestPose r;
    r.pelvis_height = 930.0;
    auto set = [&](int j, double x, double y, double z) { r.offset.row(j) << x, y, z; };
    set(0, 0, 0, 0);          // pelvis (root)
    set(1, -110, 0, 0);       // r_hip
    set(2, 0, -430, 0);       // r_knee
    set(3, 0, -440, 0);       // r_ankle
    set(4, 110, 0, 0);        // l_hip
    set(5, 0, -430, 0);       // l_knee
    set(6, 0, -440, 0);       // l_ankle
    set(7, 0, 220, 0);        // spine
    set(8, 0, 230, 0);        // thorax
    set(9, 0, 110, 0);        // neck
    set(10, 0, 120, 0);       // head
    set(11, 150, 40, 0);      // l_shoulder
    set(12, 0, -280, 0);      // l_elbow
    set(13, 0, -250, 0);      // l_wrist
    set(14, -150, 40, 0);     // r_shoulder
    set(15, 0, -280, 0);      // r_elbow
    set(16, 0, -250, 0);      // r_wrist
    return r;
  }();
  return rp;
}

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

// Per-frame pose: local rotation per joint plus the root position.
struct FramePose {
  std::array<Eigen::Matrix3d, kNumJoints> local;
  Eigen::RowVector3d root;
  FramePose() {
    local.fill(Eigen::Matrix3d::Identity());
    root.setZero();
  }
};

Eigen::Matrix<double, kNumJoints, 3> forward_kinematics(const SkeletonLayout& layout,
                                                        const FramePose& pose) {
  Eigen::Matrix<double, kNumJoints, 3> world;
  std::array<Eigen::Matrix3d, kNumJoints> acc;
  const auto& rp = rest_pose();
  world.row(0) = pose.root;
  acc[0] = pose.local[0];
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = layout.parent_of[j];
    world.row(j) = world.row(p) + (acc[p] * rp.offset.row(j).transpose()).transpose();
    acc[j] = acc[p] * pose.local[j];
  }
  return world;
}

// Smooth unit bump centered at c with width w, evaluated at tau in [0, 1].
double bump(double tau, double c, double w) {
  const double d = (tau - c) / w;
  return std::exp(-d * d);
}

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Seeded style variation shared by all classes.
struct Style {
  double amp;    // amplitude scale
  double freq;   // frequency scale
  double phase;  // phase offset, radians
};

Style draw_style(Rng& rng) {
  Style s;
  s.amp = rng.uniform(0.9, 1.1);
  s.freq = rng.uniform(0.9, 1.1);
  s.phase = rng.uniform(0.0, kTwoPi);
  return s;
}

// Joint indices, for readability below.
enum : int {
  J_PELVIS = 0, J_RHIP = 1, J_RKNEE = 2, J_RANKLE = 3, J_LHIP = 4, J_LKNEE = 5,
  J_LANKLE = 6, J_SPINE = 7, J_THORAX = 8, J_NECK = 9, J_HEAD = 10,
  J_LSHOULDER = 11, J_LELBOW = 12, J_LWRIST = 13, J_RSHOULDER = 14,
  J_RELBOW = 15, J_RWRIST = 16,
};

// Evaluates the documented parametric curves of one class at frame t.
FramePose class_pose(ActionClass cls, const Style& st, int t, int frames, double fps) {
  FramePose pose;
  const auto& rp = rest_pose();
  pose.root << 0.0, rp.pelvis_height, 0.0;
  const double tau = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
  const double sec = t / fps;

  auto gait = [&](double step_hz, double hip_amp, double knee_amp, double arm_amp,
                  double speed_mm_s, double bob_mm) {
    const double w = kTwoPi * step_hz * st.freq;
    const double ph = w * sec + st.phase;
    pose.local[J_RHIP] = rot_x(hip_amp * st.amp * std::sin(ph));
    pose.local[J_LHIP] = rot_x(hip_amp * st.amp * std::sin(ph + std::numbers::pi));
    pose.local[J_RKNEE] = rot_x(-knee_amp * st.amp * (0.5 + 0.5 * std::sin(ph + 2.0)));
    pose.local[J_LKNEE] =
        rot_x(-knee_amp * st.amp * (0.5 + 0.5 * std::sin(ph + std::numbers::pi + 2.0)));
    pose.local[J_RSHOULDER] = rot_x(arm_amp * st.amp * std::sin(ph + std::numbers::pi));
    pose.local[J_LSHOULDER] = rot_x(arm_amp * st.amp * std::sin(ph));
    pose.root(1) += bob_mm * st.amp * std::sin(2.0 * ph);
    pose.root(2) += speed_mm_s * st.amp * sec;
  };

  switch (cls) {
    case ActionClass::Stand:
      pose.local[J_SPINE] = rot_x(0.03 * st.amp * std::sin(kTwoPi * 0.3 * sec + st.phase));
      pose.local[J_LSHOULDER] = rot_x(0.04 * st.amp * std::sin(kTwoPi * 0.25 * sec + st.phase));
      pose.local[J_RSHOULDER] = rot_x(-0.04 * st.amp * std::sin(kTwoPi * 0.25 * sec + st.phase));
      break;
    case ActionClass::Walk:
      gait(0.8, 0.50, 0.55, 0.25, 1100.0, 14.0);
      break;
    case ActionClass::Run: {
      gait(1.4, 0.80, 0.95, 0.45, 2600.0, 40.0);
      // Forward lean plus a lateral torso sway so the gait cadence is
      // visible from the front view too (forward travel projects away).
      const double w = kTwoPi * 1.4 * st.freq;
      pose.local[J_SPINE] = rot_x(0.20) * rot_z(0.16 * st.amp * std::sin(w * sec + st.phase));
      pose.root(0) += 30.0 * st.amp * std::sin(w * sec + st.phase);
      break;
    }
    case ActionClass::Jump: {
      const double crouch = bump(tau, 0.22, 0.13);
      const double air = bump(tau, 0.52, 0.16);
      pose.root(1) += -150.0 * st.amp * crouch + 300.0 * st.amp * air;
      pose.local[J_RKNEE] = rot_x(-1.1 * st.amp * crouch - 0.4 * air);
      pose.local[J_LKNEE] = rot_x(-1.1 * st.amp * crouch - 0.4 * air);
      pose.local[J_RHIP] = rot_x(0.6 * st.amp * crouch);
      pose.local[J_LHIP] = rot_x(0.6 * st.amp * crouch);
      pose.local[J_RSHOULDER] = rot_x(-1.6 * st.amp * air);
      pose.local[J_LSHOULDER] = rot_x(-1.6 * st.amp * air);
      break;
    }
    case ActionClass::Wave: {
      // Right arm raised sideways, forearm oscillating.
      pose.local[J_RSHOULDER] = rot_z(2.3 * st.amp * smoothstep01(tau * 6.0));
      pose.local[J_RELBOW] =
          rot_z(0.7 + 0.5 * st.amp * std::sin(kTwoPi * 1.8 * st.freq * sec + st.phase));
      break;
    }
    case ActionClass::Kick: {
      const double w = kTwoPi * 0.7 * st.freq;
      const double swing = std::pow(std::max(0.0, std::sin(w * sec + st.phase)), 2.0);
      // Sagittal swing with a lateral abduction component so the kicking leg
      // sweeps visibly in the front view as well.
      pose.local[J_RHIP] = rot_x(1.2 * st.amp * swing) * rot_z(0.45 * st.amp * swing);
      pose.local[J_RKNEE] = rot_x(-0.5 * st.amp * swing * (1.0 - swing));
      pose.local[J_LSHOULDER] = rot_x(0.3 * st.amp * swing);
      pose.local[J_SPINE] = rot_z(-0.15 * st.amp * swing);  // counter-lean
      pose.root(1) += -20.0 * swing;
      break;
    }
    case ActionClass::Bend: {
      const double cyc = std::sin(std::numbers::pi * tau);
      pose.local[J_SPINE] = rot_x(0.95 * st.amp * cyc);
      pose.local[J_LSHOULDER] = rot_x(0.35 * st.amp * cyc);
      pose.local[J_RSHOULDER] = rot_x(0.35 * st.amp * cyc);
      pose.root(1) += -60.0 * cyc;
      break;
    }
    case ActionClass::Raise: {
      const double lift = smoothstep01(tau * 2.2);
      pose.local[J_LSHOULDER] = rot_x(-2.5 * st.amp * lift);
      pose.local[J_RSHOULDER] = rot_x(-2.5 * st.amp * lift);
      break;
    }
    case ActionClass::Throw: {
      const double windup = bump(tau, 0.35, 0.14);
      const double release = bump(tau, 0.62, 0.12);
      pose.local[J_RSHOULDER] = rot_x(1.0 * st.amp * windup - 2.1 * st.amp * release);
      pose.local[J_RELBOW] = rot_x(-1.2 * st.amp * windup);
      // Torso twist through the throw; shifts the shoulders in depth, which
      // keeps the side view distinct from a symmetric arm raise.
      pose.local[J_SPINE] =
          rot_y(0.55 * st.amp * (windup - release)) * rot_x(0.25 * st.amp * release);
      break;
    }
    case ActionClass::Pick: {
      const double reach = bump(tau, 0.45, 0.22);
      pose.local[J_SPINE] = rot_x(1.0 * st.amp * reach);
      pose.local[J_LSHOULDER] = rot_x(0.8 * st.amp * reach);
      pose.local[J_RSHOULDER] = rot_x(0.8 * st.amp * reach);
      pose.local[J_RKNEE] = rot_x(-0.5 * st.amp * reach);
      pose.local[J_LKNEE] = rot_x(-0.5 * st.amp * reach);
      pose.root(1) += -90.0 * reach;
      break;
    }
    case ActionClass::Transition:
      throw ValidationError("generate_motion: Transition clips come from make_transition_clip");
  }
  return pose;
}

}  // namespace

const char* to_string(ActionClass c) {
  switch (c) {
    case ActionClass::Walk: return "walk";
    case ActionClass::Run: return "run";
    case ActionClass::Jump: return "jump";
    case ActionClass::Wave: return "wave";
    case ActionClass::Kick: return "kick";
    case ActionClass::Bend: return "bend";
    case ActionClass::Raise: return "raise";
    case ActionClass::Throw: return "throw";
    case ActionClass::Pick: return "pick";
    case ActionClass::Stand: return "stand";
    case ActionClass::Transition: return "transition";
  }
  return "?";
}

ActionClass action_class_from_string(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(ActionClass::Transition); ++c) {
    if (name == to_string(static_cast<ActionClass>(c))) return static_cast<ActionClass>(c);
  }
  throw ValidationError("unknown action class: " + name);
}

std::vector<std::string> label_phrases(ActionClass c) {
  switch (c) {
    case ActionClass::Walk: return {"walk", "walk forward", "walk at an even pace"};
    case ActionClass::Run: return {"run", "run forward", "run with quick strides"};
    case ActionClass::Jump: return {"jump", "jump in place", "jump up high"};
    case ActionClass::Wave: return {"wave", "wave the right hand", "wave in greeting"};
    case ActionClass::Kick: return {"kick", "kick with the right leg", "kick forward"};
    case ActionClass::Bend: return {"bend", "bend down", "bend at the waist"};
    case ActionClass::Raise: return {"raise", "raise both arms", "raise the arms overhead"};
    case ActionClass::Throw: return {"throw", "throw with the right arm", "throw overhand"};
    case ActionClass::Pick: return {"pick", "pick something up", "pick up an object"};
    case ActionClass::Stand: return {"stand", "stand still", "stand upright"};
    case ActionClass::Transition: break;
  }
  throw ValidationError("no label phrases for class transition");
}

std::vector<std::string> generator_vocabulary() {
  std::set<std::string> words = {"transit", "from", "to"};
  for (int c = 0; c < kNumMotionClasses; ++c) {
    for (const auto& phrase : label_phrases(static_cast<ActionClass>(c))) {
      std::istringstream ws(phrase);
      std::string w;
      while (ws >> w) words.insert(w);
    }
  }
  return {words.begin(), words.end()};
}

double standing_pelvis_height_mm() { return rest_pose().pelvis_height; }

LabeledClip generate_motion(ActionClass cls, int duration_frames, std::uint64_t seed) {
  if (cls == ActionClass::Transition || static_cast<int>(cls) < 0 ||
      static_cast<int>(cls) >= kNumMotionClasses) {
    throw ValidationError("generate_motion: unknown or non-generable class");
  }
  if (duration_frames < 16) {
    throw ValidationError("generate_motion: duration must be at least 16 frames");
  }
  LabeledClip clip;
  clip.action_class = cls;
  clip.seed = seed;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
  const Style st = draw_style(rng);
  const auto phrases = label_phrases(cls);
  clip.label_text = phrases[rng.below(phrases.size())];

  clip.motion.layout = SkeletonLayout::h36m17();
  clip.motion.fps = 30.0;
  clip.motion.frames = duration_frames;
  clip.motion.data.resize(static_cast<Eigen::Index>(duration_frames) * kNumJoints, 3);
  for (int t = 0; t < duration_frames; ++t) {
    const FramePose pose = class_pose(cls, st, t, duration_frames, clip.motion.fps);
    clip.motion.data.middleRows(static_cast<Eigen::Index>(t) * kNumJoints, kNumJoints) =
        forward_kinematics(*clip.motion.layout, pose);
  }
  return clip;
}

std::string build_transition_label(const std::string& label_a, const std::string& label_b) {
  if (label_a.empty() || label_b.empty()) {
    throw ValidationError("build_transition_label: labels must be non-empty");
  }
  return "transit from " + label_a + " to " + label_b;
}

LabeledClip make_transition_clip(const LabeledClip& a, const LabeledClip& b,
                                 int blend_frames) {
  if (!a.motion.layout || !b.motion.layout || !(*a.motion.layout == *b.motion.layout)) {
    throw ValidationError("make_transition_clip: skeleton layouts differ");
  }
  if (blend_frames < 0 || blend_frames >= std::min(a.motion.frames, b.motion.frames)) {
    throw ValidationError("make_transition_clip: blend_frames must be below both durations");
  }
  LabeledClip out;
  out.action_class = ActionClass::Transition;
  out.label_text = build_transition_label(a.label_text, b.label_text);
  out.seed = derive_seed(a.seed, b.seed);
  out.motion.layout = a.motion.layout;
  out.motion.fps = a.motion.fps;
  const int ta = a.motion.frames;
  const int tb = b.motion.frames;
  const int joints = a.motion.joints();
  out.motion.frames = ta + tb;
  out.motion.data.resize(static_cast<Eigen::Index>(ta + tb) * joints, 3);
  for (int t = 0; t < ta; ++t) {
    auto dst = out.motion.data.middleRows(static_cast<Eigen::Index>(t) * joints, joints);
    const auto src = a.motion.data.middleRows(static_cast<Eigen::Index>(t) * joints, joints);
    if (t < ta - blend_frames) {
      dst = src;
    } else {
      const double alpha =
          static_cast<double>(t - (ta - blend_frames) + 1) / (blend_frames + 1);
      dst = (1.0 - alpha) * src + alpha * b.motion.data.topRows(joints);
    }
  }
  out.motion.data.bottomRows(static_cast<Eigen::Index>(tb) * joints) = b.motion.data;
  return out;
}

std::vector<std::string> Corpus::labels_of_other_classes(ActionClass cls) const {
  std::set<std::string> labels;
  for (const auto& clip : clips) {
    if (clip.action_class != cls) labels.insert(clip.label_text);
  }
  return {labels.begin(), labels.end()};
}

CorpusSpec CorpusSpec::balanced(int num_classes, int clips_per_class, int frames,
                                std::uint64_t seed) {
  if (num_classes < 1 || num_classes > kNumMotionClasses) {
    throw ValidationError("CorpusSpec: class count must be in [1, 10]");
  }
  CorpusSpec spec;
  for (int c = 0; c < num_classes; ++c) {
    spec.histogram.emplace_back(static_cast<ActionClass>(c), clips_per_class);
  }
  spec.frames = frames;
  spec.seed = seed;
  return spec;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  if (spec.histogram.empty()) throw ValidationError("generate_corpus: empty histogram");
  for (const auto& [cls, count] : spec.histogram) {
    if (count < 0) throw ValidationError("generate_corpus: negative clip count");
    if (cls == ActionClass::Transition) {
      throw ValidationError("generate_corpus: transitions are requested via transition_clips");
    }
  }
  Corpus corpus;
  corpus.layout = SkeletonLayout::h36m17();

  struct Job {
    ActionClass cls;
    std::uint32_t index;
    int index_in_class;
  };
  std::vector<Job> jobs;
  for (const auto& [cls, count] : spec.histogram) {
    for (int i = 0; i < count; ++i) {
      jobs.push_back({cls, static_cast<std::uint32_t>(jobs.size()), i});
    }
  }
  corpus.clips.resize(jobs.size() + spec.transition_clips);
  // Clip randomness derives from (seed, clip_index), so parallel and serial
  // generation agree bit-exactly.
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& job = jobs[i];
    LabeledClip clip =
        generate_motion(job.cls, spec.frames, derive_seed(spec.seed, job.index));
    clip.id = job.index;
    // Cycle through the phrasings within each class so that, with three or
    // more clips per class, every phrasing is present and the negative-label
    // pool has its full size.
    const auto phrases = label_phrases(job.cls);
    clip.label_text = phrases[job.index_in_class % phrases.size()];
    corpus.clips[i] = std::move(clip);
  });

  const std::uint32_t base = static_cast<std::uint32_t>(jobs.size());
  parallel_for(static_cast<std::size_t>(spec.transition_clips), [&](std::size_t i) {
    Rng rng(derive_seed(spec.seed, 0x7462u, base + i));
    const int n_classes = static_cast<int>(spec.histogram.size());
    const int ca = rng.below_int(n_classes);
    int cb = rng.below_int(n_classes - 1);
    if (cb >= ca) ++cb;
    const LabeledClip a = generate_motion(spec.histogram[ca].first, spec.frames,
                                          derive_seed(spec.seed, 0x7431u, base + i));
    const LabeledClip b = generate_motion(spec.histogram[cb].first, spec.frames,
                                          derive_seed(spec.seed, 0x7432u, base + i));
    LabeledClip blend = make_transition_clip(a, b, spec.frames / 4);
    blend.id = base + static_cast<std::uint32_t>(i);
    corpus.clips[base + i] = std::move(blend);
  });
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "clips", ec);
  if (ec) throw IoError("cannot create corpus directory: " + dir);
  corpus.layout->save((fs::path(dir) / "layout.txt").string());

  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) throw IoError("cannot write corpus manifest in " + dir);
  manifest << "# actionpose corpus manifest v1\n";
  manifest << "# fps " << corpus.fps << "\n";
  manifest << "# columns: id\tclass\tlabel_text\tseed\tduration\n";
  for (const auto& clip : corpus.clips) {
    manifest << clip.id << '\t' << to_string(clip.action_class) << '\t' << clip.label_text
             << '\t' << clip.seed << '\t' << clip.motion.frames << '\n';
  }

  for (const auto& clip : corpus.clips) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05u.mot", clip.id);
    std::ofstream os(fs::path(dir) / "clips" / name, std::ios::binary);
    if (!os) throw IoError("cannot write clip file in " + dir);
    const int joints = clip.motion.joints();
    binio::write_u32(os, static_cast<std::uint32_t>(clip.motion.frames));
    binio::write_u32(os, static_cast<std::uint32_t>(joints));
    binio::write_u32(os, 3u);
    for (Eigen::Index r = 0; r < clip.motion.data.rows(); ++r) {
      for (int c = 0; c < 3; ++c) {
        binio::write_f32(os, static_cast<float>(clip.motion.data(r, c)));
      }
    }
  }
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.layout = std::make_shared<SkeletonLayout>(
      SkeletonLayout::load((fs::path(dir) / "layout.txt").string()));

  std::ifstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) throw IoError("cannot read corpus manifest in " + dir);
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      if (hs >> key && key == "fps") hs >> corpus.fps;
      continue;
    }
    std::istringstream ls(line);
    std::string id_s, class_s, label, seed_s, dur_s;
    if (!std::getline(ls, id_s, '\t') || !std::getline(ls, class_s, '\t') ||
        !std::getline(ls, label, '\t') || !std::getline(ls, seed_s, '\t') ||
        !std::getline(ls, dur_s)) {
      throw IoError("malformed manifest line: " + line);
    }
    LabeledClip clip;
    clip.id = static_cast<std::uint32_t>(std::stoul(id_s));
    clip.action_class = action_class_from_string(class_s);
    clip.label_text = label;
    clip.seed = std::stoull(seed_s);

    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05u.mot", clip.id);
    std::ifstream is(fs::path(dir) / "clips" / name, std::ios::binary);
    if (!is) throw IoError(std::string("missing clip file: ") + name);
    const auto frames = binio::read_u32(is);
    const auto joints = binio::read_u32(is);
    const auto channels = binio::read_u32(is);
    if (joints != static_cast<std::uint32_t>(corpus.layout->joint_count()) || channels != 3) {
      throw IoError(std::string("unexpected clip tensor shape in ") + name);
    }
    clip.motion.layout = corpus.layout;
    clip.motion.fps = corpus.fps;
    clip.motion.frames = static_cast<int>(frames);
    clip.motion.data.resize(static_cast<Eigen::Index>(frames) * joints, 3);
    for (Eigen::Index r = 0; r < clip.motion.data.rows(); ++r) {
      for (int c = 0; c < 3; ++c) clip.motion.data(r, c) = binio::read_f32(is);
    }
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

std::vector<std::vector<std::int32_t>> ContrastiveBatch::candidates(int b) const {
  std::vector<std::vector<std::int32_t>> out;
  const int k = static_cast<int>(negatives[b].size());
  out.reserve(k + 1);
  int neg = 0;
  for (int slot = 0; slot <= k; ++slot) {
    if (slot == positive_index[b]) {
      out.push_back(positives[b]);
    } else {
      out.push_back(negatives[b][neg++]);
    }
  }
  return out;
}

ContrastiveBatch sample_contrastive_batch(const Corpus& corpus,
                                          const BatchSampleOptions& opts,
                                          std::uint64_t seed) {
  if (!opts.tokenize) throw ValidationError("sample_contrastive_batch: tokenize is required");
  if (opts.batch_size < 1 || opts.negatives < 1) {
    throw ValidationError("sample_contrastive_batch: batch_size and K must be positive");
  }
  if (corpus.clips.empty()) throw ValidationError("sample_contrastive_batch: empty corpus");
  for (const auto& clip : corpus.clips) {
    if (clip.motion.frames < opts.window_frames) {
      throw ValidationError("sample_contrastive_batch: clip shorter than the window");
    }
  }

  const int batch = opts.batch_size;
  const int k = opts.negatives;
  ContrastiveBatch out;
  out.anchors.resize(batch);
  out.records.resize(batch);
  out.targets_3d.resize(batch);
  out.positives.resize(batch);
  out.negatives.resize(batch);
  out.targets_y.resize(batch, k + 1);
  out.positive_index.resize(batch);
  out.clip_ids.resize(batch);
  out.views.resize(batch);

  // Anchor selection is drawn up front from the batch seed; the per-anchor
  // pipeline then runs on independent derived streams (parallel-safe).
  Rng pick(derive_seed(seed, 0xA11C));
  std::vector<int> clip_idx(batch);
  std::vector<View> views(batch);
  std::vector<int> starts(batch);
  for (int b = 0; b < batch; ++b) {
    clip_idx[b] = pick.below_int(static_cast<int>(corpus.clips.size()));
    views[b] = opts.both_views && pick.below(2) == 1 ? View::side : View::front;
    const int slack = corpus.clips[clip_idx[b]].motion.frames - opts.window_frames;
    starts[b] = slack > 0 ? pick.below_int(slack + 1) : 0;
  }

  parallel_for(static_cast<std::size_t>(batch), [&](std::size_t bi) {
    const int b = static_cast<int>(bi);
    const LabeledClip& clip = corpus.clips[clip_idx[b]];
    const std::uint64_t anchor_seed = derive_seed(seed, 0xB00C, b);
    Rng rng(anchor_seed);

    PoseSeq3D window;
    window.layout = clip.motion.layout;
    window.fps = clip.motion.fps;
    window.frames = opts.window_frames;
    const int joints = clip.motion.joints();
    window.data = clip.motion.data.middleRows(
        static_cast<Eigen::Index>(starts[b]) * joints,
        static_cast<Eigen::Index>(opts.window_frames) * joints);

    out.targets_3d[b] = root_center(window);
    out.clip_ids[b] = clip.id;
    out.views[b] = views[b];

    PoseSeq2D projected = project_orthographic(window, views[b]);
    PoseSeq2D normalized = normalize_to_pixels(projected, clip_bbox(projected));
    if (opts.corrupt) {
      auto [corrupted, record] = opts.corrupt(normalized, derive_seed(anchor_seed, 0xC0));
      out.anchors[b] = std::move(corrupted);
      out.records[b] = std::move(record);
    } else {
      out.anchors[b] = std::move(normalized);
      out.records[b] = CorruptionRecord{};
    }

    out.positives[b] = opts.tokenize(clip.label_text);
    const auto pool = corpus.labels_of_other_classes(clip.action_class);
    if (static_cast<int>(pool.size()) < k) {
      throw ValidationError(
          "sample_contrastive_batch: fewer than K distinct labels outside class '" +
          std::string(to_string(clip.action_class)) + "'");
    }
    const auto pick_idx = rng.sample_without_replacement(pool.size(), k);
    out.negatives[b].clear();
    for (auto pi : pick_idx) out.negatives[b].push_back(opts.tokenize(pool[pi]));

    out.positive_index[b] = rng.below_int(k + 1);
    const double eps = opts.label_smoothing;
    for (int i = 0; i <= k; ++i) {
      out.targets_y(b, i) = i == out.positive_index[b] ? 1.0 - eps : eps / k;
    }
  });
  return out;
}

}  // namespace actionpose
