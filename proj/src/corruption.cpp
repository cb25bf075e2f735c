// SPDX-License-Identifier: Apache-2.0
#include "actionpose/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "actionpose/binio.hpp"
#include "actionpose/rng.hpp"

namespace actionpose {

namespace {

constexpr char kRecordMagic[8] = {'A', 'P', 'C', 'R', 'E', 'C', '0', '1'};
constexpr double kOutlierRange = 0.3;

// Sub-stream labels so replay does not depend on how much randomness the
// mode draw consumed.
enum : std::uint64_t { kStreamMask = 1, kStreamNoise = 2 };

void zero_entry(PoseSeq2D& seq, int t, int j) {
  seq.data.row(static_cast<Eigen::Index>(t) * seq.joints() + j).setZero();
}

CorruptionRecord base_record(const PoseSeq2D& seq, CorruptionMode mode,
                             std::uint64_t seed) {
  CorruptionRecord rec;
  rec.mode = mode;
  rec.seed = seed;
  rec.frames = seq.frames;
  rec.joints = seq.joints();
  rec.masked.assign(static_cast<std::size_t>(seq.frames) * seq.joints(), 0);
  return rec;
}

}  // namespace

const char* to_string(CorruptionMode m) {
  switch (m) {
    case CorruptionMode::joint_frame: return "joint_frame";
    case CorruptionMode::body_part: return "body_part";
    case CorruptionMode::time_window: return "time_window";
  }
  return "?";
}

void CorruptionConfig::validate(int frames) const {
  if (joint_ratio < 0.0 || joint_ratio >= 1.0 || frame_ratio < 0.0 || frame_ratio >= 1.0) {
    throw ValidationError("corruption ratios must be in [0, 1)");
  }
  if (window_min < 2 || window_min > window_max) {
    throw ValidationError("corruption window bounds need 2 <= T1 <= T2");
  }
  if (window_max >= frames) {
    throw ValidationError("corruption window T2 must be smaller than the sequence length");
  }
  if (sigma < 0.0) throw ValidationError("noise sigma must be non-negative");
  if (outlier_prob < 0.0 || outlier_prob > 1.0) {
    throw ValidationError("outlier probability must be in [0, 1]");
  }
}

std::size_t CorruptionRecord::masked_count() const {
  std::size_t n = 0;
  for (auto m : masked) n += m;
  return n;
}

bool CorruptionRecord::operator==(const CorruptionRecord& other) const {
  return mode == other.mode && masked == other.masked &&
         noise_applied == other.noise_applied && seed == other.seed &&
         frames == other.frames && joints == other.joints &&
         joint_ratio == other.joint_ratio && frame_ratio == other.frame_ratio &&
         part_index == other.part_index && window_start == other.window_start &&
         window_len == other.window_len && sigma == other.sigma &&
         outlier_prob == other.outlier_prob;
}

void CorruptionRecord::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write corruption record: " + path);
  binio::write_bytes(os, kRecordMagic, sizeof(kRecordMagic));
  binio::write_u8(os, static_cast<std::uint8_t>(mode));
  binio::write_u64(os, seed);
  binio::write_u32(os, static_cast<std::uint32_t>(frames));
  binio::write_u32(os, static_cast<std::uint32_t>(joints));
  binio::write_u8(os, noise_applied ? 1 : 0);
  binio::write_f64(os, joint_ratio);
  binio::write_f64(os, frame_ratio);
  binio::write_i32(os, part_index);
  binio::write_i32(os, window_start);
  binio::write_i32(os, window_len);
  binio::write_f64(os, sigma);
  binio::write_f64(os, outlier_prob);
  std::uint8_t byte = 0;
  int fill = 0;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    byte |= static_cast<std::uint8_t>((masked[i] ? 1 : 0) << fill);
    if (++fill == 8) {
      binio::write_u8(os, byte);
      byte = 0;
      fill = 0;
    }
  }
  if (fill > 0) binio::write_u8(os, byte);
}

CorruptionRecord CorruptionRecord::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read corruption record: " + path);
  char magic[8];
  binio::read_bytes(is, magic, 8);
  if (std::memcmp(magic, kRecordMagic, 8) != 0) {
    throw IoError("bad corruption record magic: " + path);
  }
  CorruptionRecord rec;
  rec.mode = static_cast<CorruptionMode>(binio::read_u8(is));
  rec.seed = binio::read_u64(is);
  rec.frames = static_cast<int>(binio::read_u32(is));
  rec.joints = static_cast<int>(binio::read_u32(is));
  rec.noise_applied = binio::read_u8(is) != 0;
  rec.joint_ratio = binio::read_f64(is);
  rec.frame_ratio = binio::read_f64(is);
  rec.part_index = binio::read_i32(is);
  rec.window_start = binio::read_i32(is);
  rec.window_len = binio::read_i32(is);
  rec.sigma = binio::read_f64(is);
  rec.outlier_prob = binio::read_f64(is);
  const std::size_t n = static_cast<std::size_t>(rec.frames) * rec.joints;
  rec.masked.assign(n, 0);
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 8 == 0) byte = binio::read_u8(is);
    rec.masked[i] = (byte >> (i % 8)) & 1;
  }
  return rec;
}

std::pair<PoseSeq2D, CorruptionRecord> mask_joint_frame(const PoseSeq2D& seq,
                                                        double joint_ratio,
                                                        double frame_ratio,
                                                        std::uint64_t seed) {
  seq.validate();
  if (joint_ratio < 0.0 || joint_ratio >= 1.0 || frame_ratio < 0.0 || frame_ratio >= 1.0) {
    throw ValidationError("mask_joint_frame: ratios must be in [0, 1)");
  }
  const int frames = seq.frames;
  const int joints = seq.joints();
  PoseSeq2D out = seq;
  CorruptionRecord rec = base_record(seq, CorruptionMode::joint_frame, seed);
  rec.joint_ratio = joint_ratio;
  rec.frame_ratio = frame_ratio;

  Rng rng(derive_seed(seed, kStreamMask));
  const int n_frames = round_count(frame_ratio, frames);
  const auto frame_pick = rng.sample_without_replacement(frames, n_frames);
  std::vector<std::uint8_t> frame_masked(frames, 0);
  for (auto f : frame_pick) frame_masked[f] = 1;
  for (int t = 0; t < frames; ++t) {
    if (!frame_masked[t]) continue;
    for (int j = 0; j < joints; ++j) {
      zero_entry(out, t, j);
      rec.masked[static_cast<std::size_t>(t) * joints + j] = 1;
    }
  }

  // Individual joints among the surviving frames' cells.
  std::vector<std::size_t> cells;
  cells.reserve(static_cast<std::size_t>(frames - n_frames) * joints);
  for (int t = 0; t < frames; ++t) {
    if (frame_masked[t]) continue;
    for (int j = 0; j < joints; ++j) {
      cells.push_back(static_cast<std::size_t>(t) * joints + j);
    }
  }
  const int n_cells = round_count(joint_ratio, static_cast<int>(cells.size()));
  const auto cell_pick = rng.sample_without_replacement(cells.size(), n_cells);
  for (auto c : cell_pick) {
    const std::size_t cell = cells[c];
    out.data.row(static_cast<Eigen::Index>(cell)).setZero();
    rec.masked[cell] = 1;
  }
  return {std::move(out), std::move(rec)};
}

std::pair<PoseSeq2D, CorruptionRecord> mask_body_part(const PoseSeq2D& seq,
                                                      std::uint64_t seed) {
  seq.validate();
  PoseSeq2D out = seq;
  CorruptionRecord rec = base_record(seq, CorruptionMode::body_part, seed);
  Rng rng(derive_seed(seed, kStreamMask));
  rec.part_index = rng.below_int(kNumBodyParts);
  const auto& joints = seq.layout->part_joints(static_cast<BodyPart>(rec.part_index));
  for (int t = 0; t < seq.frames; ++t) {
    for (int j : joints) {
      zero_entry(out, t, j);
      rec.masked[static_cast<std::size_t>(t) * seq.joints() + j] = 1;
    }
  }
  return {std::move(out), std::move(rec)};
}

std::pair<PoseSeq2D, CorruptionRecord> mask_time_window(const PoseSeq2D& seq, int t1,
                                                        int t2, std::uint64_t seed) {
  seq.validate();
  if (t1 < 2 || t1 > t2) throw ValidationError("mask_time_window: need 2 <= T1 <= T2");
  if (t2 >= seq.frames) {
    throw ValidationError("mask_time_window: T2 must be smaller than the sequence length");
  }
  PoseSeq2D out = seq;
  CorruptionRecord rec = base_record(seq, CorruptionMode::time_window, seed);
  Rng rng(derive_seed(seed, kStreamMask));
  rec.window_len = t1 + rng.below_int(t2 - t1 + 1);
  rec.window_start = rng.below_int(seq.frames - rec.window_len + 1);
  for (int t = rec.window_start; t < rec.window_start + rec.window_len; ++t) {
    for (int j = 0; j < seq.joints(); ++j) {
      zero_entry(out, t, j);
      rec.masked[static_cast<std::size_t>(t) * seq.joints() + j] = 1;
    }
  }
  return {std::move(out), std::move(rec)};
}

PoseSeq2D add_noise(const PoseSeq2D& seq, double sigma, double outlier_prob,
                    std::uint64_t seed) {
  seq.validate();
  if (sigma < 0.0) throw ValidationError("add_noise: sigma must be non-negative");
  PoseSeq2D out = seq;
  if (sigma == 0.0 && outlier_prob == 0.0) return out;
  Rng rng(derive_seed(seed, kStreamNoise));
  // Confidence attenuation keeps strictly positive values so noised entries
  // never collide with the masked encoding (confidence exactly 0).
  const double sigma_eff = std::max(sigma, 1e-6);
  for (Eigen::Index r = 0; r < out.data.rows(); ++r) {
    // Fixed draw count per entry keeps the stream position independent of
    // the mask pattern.
    const double g0 = rng.gaussian();
    const double g1 = rng.gaussian();
    const double u_outlier = rng.uniform();
    const double o0 = rng.uniform(-kOutlierRange, kOutlierRange);
    const double o1 = rng.uniform(-kOutlierRange, kOutlierRange);
    if (out.data(r, 2) == 0.0) continue;  // masked entries stay exactly zero
    double nx = sigma * g0;
    double ny = sigma * g1;
    if (u_outlier < outlier_prob) {
      nx = o0;
      ny = o1;
    }
    out.data(r, 0) += nx;
    out.data(r, 1) += ny;
    const double mag = std::sqrt(nx * nx + ny * ny);
    const double conf = std::exp(-std::min(mag / sigma_eff, 700.0));
    out.data(r, 2) = std::min(out.data(r, 2), std::min(1.0, std::max(0.0, conf)));
  }
  return out;
}

std::pair<PoseSeq2D, CorruptionRecord> schedule_corruption(const PoseSeq2D& seq,
                                                           std::uint64_t seed,
                                                           const CorruptionConfig& config) {
  seq.validate();
  config.validate(seq.frames);
  Rng rng(derive_seed(seed, 0));
  const double u = rng.uniform();
  CorruptionMode mode;
  if (u < 0.5) {
    mode = CorruptionMode::joint_frame;
  } else if (u < 0.75) {
    mode = CorruptionMode::body_part;
  } else {
    mode = CorruptionMode::time_window;
  }
  std::pair<PoseSeq2D, CorruptionRecord> result;
  switch (mode) {
    case CorruptionMode::joint_frame:
      result = mask_joint_frame(seq, config.joint_ratio, config.frame_ratio, seed);
      break;
    case CorruptionMode::body_part:
      result = mask_body_part(seq, seed);
      break;
    case CorruptionMode::time_window:
      result = mask_time_window(seq, config.window_min, config.window_max, seed);
      break;
  }
  result.first = add_noise(result.first, config.sigma, config.outlier_prob, seed);
  result.second.noise_applied = config.sigma > 0.0 || config.outlier_prob > 0.0;
  result.second.sigma = config.sigma;
  result.second.outlier_prob = config.outlier_prob;
  return result;
}

PoseSeq2D replay_corruption(const PoseSeq2D& seq, const CorruptionRecord& record) {
  seq.validate();
  if (seq.frames != record.frames || seq.joints() != record.joints) {
    throw ValidationError("replay_corruption: record shape mismatch");
  }
  PoseSeq2D out;
  switch (record.mode) {
    case CorruptionMode::joint_frame:
      out = mask_joint_frame(seq, record.joint_ratio, record.frame_ratio, record.seed).first;
      break;
    case CorruptionMode::body_part:
      out = mask_body_part(seq, record.seed).first;
      break;
    case CorruptionMode::time_window: {
      // Replay with the recorded window so the result does not depend on the
      // bounds the schedule was configured with.
      out = seq;
      for (int t = record.window_start; t < record.window_start + record.window_len; ++t) {
        for (int j = 0; j < seq.joints(); ++j) zero_entry(out, t, j);
      }
      break;
    }
  }
  if (record.noise_applied) {
    out = add_noise(out, record.sigma, record.outlier_prob, record.seed);
  }
  return out;
}

}  // namespace actionpose
