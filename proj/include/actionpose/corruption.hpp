// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "actionpose/skeleton.hpp"

namespace actionpose {

enum class CorruptionMode : int {
  joint_frame = 0,
  body_part = 1,
  time_window = 2,
};

const char* to_string(CorruptionMode m);

struct CorruptionConfig {
  double joint_ratio = 0.05;
  double frame_ratio = 0.15;
  int window_min = 30;  // T1
  int window_max = 80;  // T2
  double sigma = 0.01;
  double outlier_prob = 0.02;

  void validate(int frames) const;
};

// Which entries of a 2D sequence were masked/noised; replaying the record on
// the original input reproduces the corrupted output bit-identically.
struct CorruptionRecord {
  CorruptionMode mode = CorruptionMode::joint_frame;
  std::vector<std::uint8_t> masked;  // T*J flags, row index t*J + j
  bool noise_applied = false;
  std::uint64_t seed = 0;
  int frames = 0;
  int joints = 0;

  // Mode-specific parameters.
  double joint_ratio = 0.0;
  double frame_ratio = 0.0;
  int part_index = -1;
  int window_start = -1;
  int window_len = -1;

  // Noise parameters, kept so the record is self-contained for replay.
  double sigma = 0.0;
  double outlier_prob = 0.0;

  std::size_t masked_count() const;
  bool is_masked(int t, int j) const { return masked[static_cast<std::size_t>(t) * joints + j] != 0; }

  // Compact binary sidecar (mask bits packed 8 per byte).
  void save(const std::string& path) const;
  static CorruptionRecord load(const std::string& path);

  bool operator==(const CorruptionRecord& other) const;
};

// Deterministic round-half-up count used by the masking post-conditions.
inline int round_count(double ratio, int n) {
  return static_cast<int>(ratio * n + 0.5);
}

// Masks exactly round(frame_ratio*T) whole frames, then exactly
// round(joint_ratio * T_remaining * J) individual joints of the remaining
// frames, uniformly at random. Masked entries become (0, 0, 0).
std::pair<PoseSeq2D, CorruptionRecord> mask_joint_frame(const PoseSeq2D& seq,
                                                        double joint_ratio,
                                                        double frame_ratio,
                                                        std::uint64_t seed);

// Chooses one of the six body parts uniformly and masks all of its joints in
// every frame.
std::pair<PoseSeq2D, CorruptionRecord> mask_body_part(const PoseSeq2D& seq,
                                                      std::uint64_t seed);

// Masks all joints inside a window of length uniform in [t1, t2] starting
// uniform in [0, T - len].
std::pair<PoseSeq2D, CorruptionRecord> mask_time_window(const PoseSeq2D& seq, int t1,
                                                        int t2, std::uint64_t seed);

// Adds i.i.d. Gaussian(0, sigma^2) to x, y of unmasked entries; with
// probability outlier_prob an entry instead gets a uniform offset in
// [-0.3, 0.3] per coordinate. Confidence becomes exp(-|noise| / sigma)
// clipped to [0, 1]; masked entries are untouched.
PoseSeq2D add_noise(const PoseSeq2D& seq, double sigma, double outlier_prob,
                    std::uint64_t seed);

// Picks a mode with probabilities (0.5, 0.25, 0.25), applies it, then
// applies add_noise. The returned record replays the whole pipeline.
std::pair<PoseSeq2D, CorruptionRecord> schedule_corruption(const PoseSeq2D& seq,
                                                           std::uint64_t seed,
                                                           const CorruptionConfig& config);

// Re-applies a recorded corruption to the original input; bit-identical to
// the run that produced the record.
PoseSeq2D replay_corruption(const PoseSeq2D& seq, const CorruptionRecord& record);

}  // namespace actionpose
