// SPDX-License-Identifier: Apache-2.0
#include "actionpose/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "actionpose/binio.hpp"
#include "actionpose/corpus.hpp"

namespace actionpose {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'P', 'C', 'K', 'P', 'T', '0', '1'};

std::string block_prefix(const std::string& stream, int index) {
  return stream + ".block" + std::to_string(index);
}

}  // namespace

// ---------------------------------------------------------------------------
// tokenizer

Tokenizer::Tokenizer(const std::vector<std::string>& words) {
  id_to_word_ = {"<PAD>", "<UNK>", "<CLS>", "<SEP>"};
  for (const auto& w : words) id_to_word_.push_back(w);
  for (std::size_t i = 0; i < id_to_word_.size(); ++i) {
    word_to_id_[id_to_word_[i]] = static_cast<std::int32_t>(i);
  }
}

Tokenizer Tokenizer::for_generator_vocab() { return Tokenizer(generator_vocabulary()); }

std::vector<std::int32_t> Tokenizer::tokenize(const std::string& text) const {
  std::istringstream ws(text);
  std::vector<std::int32_t> ids = {kCls};
  std::string word;
  while (ws >> word) {
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    const auto it = word_to_id_.find(word);
    ids.push_back(it == word_to_id_.end() ? kUnk : it->second);
  }
  if (ids.size() == 1) throw ValidationError("tokenize: empty text");
  ids.push_back(kSep);
  return ids;
}

std::string Tokenizer::detokenize(const std::vector<std::int32_t>& ids) const {
  std::string out;
  for (const auto id : ids) {
    if (id == kCls || id == kSep || id == kPad) continue;
    if (id < 0 || id >= vocab_size()) throw ValidationError("detokenize: id out of range");
    if (!out.empty()) out += ' ';
    out += id_to_word_[id];
  }
  return out;
}

// ---------------------------------------------------------------------------
// config

void ModelConfig::validate() const {
  if (c_in < 1 || c_f < 1) throw ValidationError("model: channel widths must be positive");
  if (l1 < 1 || l2 < 1) throw ValidationError("model: l1 and l2 must be at least 1");
  if (l3 < 1) throw ValidationError("model: l3 must be at least 1");
  if (heads < 1 || c_f % heads != 0) {
    throw ValidationError("model: heads must divide c_f");
  }
  if (ff_mult < 1) throw ValidationError("model: ff_mult must be positive");
  if (align_dim < 1) throw ValidationError("model: align_dim must be positive");
  if (vocab_size < 5) throw ValidationError("model: vocabulary is too small");
  if (t_max < 2 || text_max_tokens < 3) throw ValidationError("model: sequence caps too small");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("model: dropout must be in [0, 1)");
  if (joints != kNumJoints) throw ValidationError("model: joint count must be 17");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["model.c_in"] = std::to_string(c_in);
  kv["model.c_f"] = std::to_string(c_f);
  kv["model.joints"] = std::to_string(joints);
  kv["model.t_max"] = std::to_string(t_max);
  kv["model.l1"] = std::to_string(l1);
  kv["model.l2"] = std::to_string(l2);
  kv["model.l3"] = std::to_string(l3);
  kv["model.heads"] = std::to_string(heads);
  kv["model.ff_mult"] = std::to_string(ff_mult);
  kv["model.vocab_size"] = std::to_string(vocab_size);
  kv["model.text_max_tokens"] = std::to_string(text_max_tokens);
  kv["model.dropout"] = std::to_string(dropout);
  kv["model.align_dim"] = std::to_string(align_dim);
  kv["model.use_temporal_pe"] = use_temporal_pe ? "1" : "0";
  return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("model config: missing key " + key);
    return it->second;
  };
  c.c_in = std::stoi(get("model.c_in"));
  c.c_f = std::stoi(get("model.c_f"));
  c.joints = std::stoi(get("model.joints"));
  c.t_max = std::stoi(get("model.t_max"));
  c.l1 = std::stoi(get("model.l1"));
  c.l2 = std::stoi(get("model.l2"));
  c.l3 = std::stoi(get("model.l3"));
  c.heads = std::stoi(get("model.heads"));
  c.ff_mult = std::stoi(get("model.ff_mult"));
  c.vocab_size = std::stoi(get("model.vocab_size"));
  c.text_max_tokens = std::stoi(get("model.text_max_tokens"));
  c.dropout = std::stod(get("model.dropout"));
  c.align_dim = std::stoi(get("model.align_dim"));
  c.use_temporal_pe = get("model.use_temporal_pe") == "1";
  return c;
}

// ---------------------------------------------------------------------------
// construction

ActionPoseModel::ActionPoseModel(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)) {
  config_.validate();
  const int c = config_.c_f;
  const int j = config_.joints;
  const int ff = config_.ff_mult * c;

  auto add_linear = [&](const std::string& prefix, int in, int out) {
    add_param(prefix + ".w", in, out);
    add_param(prefix + ".b", 1, out);
  };
  auto add_norm = [&](const std::string& prefix) {
    add_param(prefix + ".gamma", 1, c);
    add_param(prefix + ".beta", 1, c);
  };
  auto add_attention = [&](const std::string& prefix) {
    add_linear(prefix + ".q", c, c);
    add_linear(prefix + ".k", c, c);
    add_linear(prefix + ".v", c, c);
    add_linear(prefix + ".out", c, c);
  };
  auto add_ff = [&](const std::string& prefix) {
    add_linear(prefix + ".in", c, ff);
    add_linear(prefix + ".out", ff, c);
  };

  // Pose stream.
  add_linear("pose.lift", config_.c_in, c);
  add_param("pose.token", j, c);
  add_param("pose.pe_time", config_.t_max, c);
  add_param("pose.pe_joint", j, c);
  for (int i = 0; i < config_.l1 + config_.l2; ++i) {
    const std::string p = block_prefix("pose", i);
    add_norm(p + ".ln_s");
    add_attention(p + ".sattn");
    add_norm(p + ".ln_t");
    add_attention(p + ".tattn");
    add_norm(p + ".ln_f");
    add_ff(p + ".ff");
  }
  add_norm("pose.final_ln");

  // Text stream.
  add_param("text.embed", config_.vocab_size, c);
  add_param("text.pe", config_.text_max_tokens, c);
  for (int i = 0; i < config_.l3; ++i) {
    const std::string p = block_prefix("text", i);
    add_norm(p + ".ln_a");
    add_attention(p + ".attn");
    add_norm(p + ".ln_f");
    add_ff(p + ".ff");
  }
  add_norm("text.final_ln");

  // Pose pooling: per-joint MLP, learnable joint reduction, then projection
  // into the alignment space.
  add_linear("pose_pool.l1", c, c);
  add_norm("pose_pool.ln1");
  add_param("pose_pool.joint_weight", j, 1);
  add_linear("pose_pool.l2", c, c);
  add_norm("pose_pool.ln2");
  add_linear("pose_pool.out", c, config_.align_dim);

  // Text pooling.
  add_linear("text_pool.l1", c, c);
  add_norm("text_pool.ln1");
  add_linear("text_pool.out", c, config_.align_dim);

  // Regression head.
  add_linear("head", c, 3);

  init_params(init_seed);
}

ag::Parameter& ActionPoseModel::add_param(const std::string& name, Eigen::Index rows,
                                          Eigen::Index cols) {
  params_.push_back(std::make_unique<ag::Parameter>(name, rows, cols));
  by_name_[name] = params_.back().get();
  return *params_.back();
}

void ActionPoseModel::init_params(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1417));
  for (auto& p : params_) {
    const std::string& n = p->name;
    const bool is_gamma = n.ends_with(".gamma");
    const bool is_beta = n.ends_with(".beta");
    const bool is_bias = n.ends_with(".b");
    const bool is_joint_weight = n == "pose_pool.joint_weight";
    const bool is_weight = n.ends_with(".w");
    if (is_gamma) {
      p->value.setOnes();
    } else if (is_beta || is_bias || is_joint_weight) {
      p->value.setZero();
    } else {
      // Fan-in scaled weights; feature-width scaled embedding tables. At
      // these widths a fixed small stddev starves the class tokens of
      // input-dependent signal.
      const double fan = is_weight ? static_cast<double>(p->value.rows())
                                   : static_cast<double>(p->value.cols());
      const double stddev = 1.0 / std::sqrt(fan);
      for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
          p->value(r, c) = stddev * rng.gaussian();
        }
      }
    }
  }
}

std::vector<ag::Parameter*> ActionPoseModel::parameters() {
  std::vector<ag::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const ag::Parameter*> ActionPoseModel::parameters() const {
  std::vector<const ag::Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

ag::Parameter& ActionPoseModel::param(const std::string& name) {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ValidationError("unknown parameter: " + name);
  return *it->second;
}

long ActionPoseModel::param_count() const {
  long n = 0;
  for (const auto& p : params_) n += static_cast<long>(p->size());
  return n;
}

long ActionPoseModel::expected_param_count(const ModelConfig& cfg) {
  const long c = cfg.c_f;
  const long j = cfg.joints;
  const long ff = static_cast<long>(cfg.ff_mult) * c;
  auto lin = [](long in, long out) { return in * out + out; };
  const long norm = 2 * c;
  const long attention = 4 * lin(c, c);
  const long ffn = lin(c, ff) + lin(ff, c);
  const long pose_block = 3 * norm + 2 * attention + ffn;
  const long text_block = 2 * norm + attention + ffn;

  long total = 0;
  total += lin(cfg.c_in, c) + j * c + static_cast<long>(cfg.t_max) * c + j * c;
  total += (cfg.l1 + cfg.l2) * pose_block + norm;
  total += static_cast<long>(cfg.vocab_size) * c + static_cast<long>(cfg.text_max_tokens) * c;
  total += cfg.l3 * text_block + norm;
  total += lin(c, c) + norm + j + lin(c, c) + norm + lin(c, cfg.align_dim);
  total += lin(c, c) + norm + lin(c, cfg.align_dim);
  total += lin(c, 3);
  return total;
}

bool ActionPoseModel::is_finetuned_param(const std::string& name) {
  return name.starts_with("pose.") || name.starts_with("head.");
}

// ---------------------------------------------------------------------------
// forward

ag::Node* ActionPoseModel::attention_sublayer(ag::Tape& tape, ag::Node* x,
                                              const std::string& prefix, int n_slices,
                                              int slice_len) {
  ag::Node* q = tape.linear(x, param(prefix + ".q.w"), &param(prefix + ".q.b"));
  ag::Node* k = tape.linear(x, param(prefix + ".k.w"), &param(prefix + ".k.b"));
  ag::Node* v = tape.linear(x, param(prefix + ".v.w"), &param(prefix + ".v.b"));
  ag::Node* attn = tape.attention(q, k, v, n_slices, slice_len, config_.heads);
  return tape.linear(attn, param(prefix + ".out.w"), &param(prefix + ".out.b"));
}

ag::Node* ActionPoseModel::ff_sublayer(ag::Tape& tape, ag::Node* x, const std::string& prefix,
                                       bool train, Rng* dropout_rng) {
  ag::Node* h = tape.linear(x, param(prefix + ".in.w"), &param(prefix + ".in.b"));
  h = tape.gelu(h);
  if (train && config_.dropout > 0.0 && dropout_rng) {
    h = tape.dropout(h, config_.dropout, *dropout_rng, true);
  }
  return tape.linear(h, param(prefix + ".out.w"), &param(prefix + ".out.b"));
}

ag::Node* ActionPoseModel::pose_block(ag::Tape& tape, ag::Node* x, int index, int batch,
                                      int frames, bool train, Rng* dropout_rng) {
  // Rows ordered (sample, frame, joint); frames includes the <POSE> slot.
  const std::string p = block_prefix("pose", index);
  const int j = config_.joints;
  const int rows = batch * frames * j;

  // Spatial attention across joints inside each (sample, frame) slice.
  ag::Node* h = tape.layer_norm(x, param(p + ".ln_s.gamma"), param(p + ".ln_s.beta"));
  h = attention_sublayer(tape, h, p + ".sattn", batch * frames, j);
  x = tape.add(x, h);

  // Temporal attention across frames per (sample, joint); permute rows from
  // (b, t, j) to (b, j, t) so slices are contiguous.
  std::vector<int> to_bjt(rows), to_btj(rows);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < frames; ++t) {
      for (int jj = 0; jj < j; ++jj) {
        const int btj = (b * frames + t) * j + jj;
        const int bjt = (b * j + jj) * frames + t;
        to_bjt[bjt] = btj;
        to_btj[btj] = bjt;
      }
    }
  }
  h = tape.layer_norm(x, param(p + ".ln_t.gamma"), param(p + ".ln_t.beta"));
  h = tape.row_permute(h, to_bjt);
  h = attention_sublayer(tape, h, p + ".tattn", batch * j, frames);
  h = tape.row_permute(h, to_btj);
  x = tape.add(x, h);

  ag::Node* f = tape.layer_norm(x, param(p + ".ln_f.gamma"), param(p + ".ln_f.beta"));
  f = ff_sublayer(tape, f, p + ".ff", train, dropout_rng);
  return tape.add(x, f);
}

ActionPoseModel::PoseTaps ActionPoseModel::pose_encode(ag::Tape& tape, const PoseBatch& batch,
                                                        bool train, Rng* dropout_rng) {
  const int b = batch.batch;
  const int t = batch.frames;
  const int j = config_.joints;
  if (t < 1 || t > config_.t_max) {
    throw ValidationError("pose_encode: frame count outside [1, t_max]");
  }
  if (batch.x.rows() != static_cast<Eigen::Index>(b) * t * j ||
      batch.x.cols() != config_.c_in) {
    throw ValidationError("pose_encode: input tensor shape mismatch");
  }

  ag::Node* x = tape.input(batch.x);
  x = tape.linear(x, param("pose.lift.w"), &param("pose.lift.b"));

  std::vector<int> joint_ids(static_cast<std::size_t>(b) * t * j);
  std::vector<int> time_ids(joint_ids.size());
  for (int bi = 0; bi < b; ++bi) {
    for (int ti = 0; ti < t; ++ti) {
      for (int ji = 0; ji < j; ++ji) {
        const std::size_t r = (static_cast<std::size_t>(bi) * t + ti) * j + ji;
        joint_ids[r] = ji;
        time_ids[r] = ti;
      }
    }
  }
  x = tape.add_table_rows(x, param("pose.pe_joint"), joint_ids);
  if (config_.use_temporal_pe) {
    x = tape.add_table_rows(x, param("pose.pe_time"), time_ids);
  }
  if (train && config_.dropout > 0.0 && dropout_rng) {
    x = tape.dropout(x, config_.dropout, *dropout_rng, true);
  }

  x = tape.prepend_token(x, param("pose.token"), b, t, j);

  PoseTaps taps{nullptr, nullptr};
  for (int i = 0; i < config_.l1 + config_.l2; ++i) {
    x = pose_block(tape, x, i, b, t + 1, train, dropout_rng);
    if (i == config_.l1 - 1) taps.mid = x;
  }
  taps.final = tape.layer_norm(x, param("pose.final_ln.gamma"), param("pose.final_ln.beta"));
  return taps;
}

ag::Node* ActionPoseModel::pool_pose(ag::Tape& tape, ag::Node* mid_tap, int batch) {
  const int j = config_.joints;
  const Eigen::Index rows = mid_tap->val.rows();
  const int frames_incl_token = static_cast<int>(rows / (static_cast<Eigen::Index>(batch) * j));
  // The <POSE> token occupies temporal index 0 of every sample.
  std::vector<int> token_rows(static_cast<std::size_t>(batch) * j);
  for (int b = 0; b < batch; ++b) {
    for (int ji = 0; ji < j; ++ji) {
      token_rows[static_cast<std::size_t>(b) * j + ji] = (b * frames_incl_token) * j + ji;
    }
  }
  ag::Node* h = tape.row_gather(mid_tap, token_rows);
  h = tape.linear(h, param("pose_pool.l1.w"), &param("pose_pool.l1.b"));
  h = tape.gelu(h);
  h = tape.layer_norm(h, param("pose_pool.ln1.gamma"), param("pose_pool.ln1.beta"));
  h = tape.pool_joints(h, param("pose_pool.joint_weight"), batch, j);
  h = tape.linear(h, param("pose_pool.l2.w"), &param("pose_pool.l2.b"));
  h = tape.gelu(h);
  h = tape.layer_norm(h, param("pose_pool.ln2.gamma"), param("pose_pool.ln2.beta"));
  h = tape.linear(h, param("pose_pool.out.w"), &param("pose_pool.out.b"));
  return tape.normalize_rows(h);
}

ag::Node* ActionPoseModel::text_block(ag::Tape& tape, ag::Node* x, int index, bool train,
                                      Rng* dropout_rng) {
  const std::string p = block_prefix("text", index);
  const int n = static_cast<int>(x->val.rows());
  ag::Node* h = tape.layer_norm(x, param(p + ".ln_a.gamma"), param(p + ".ln_a.beta"));
  h = attention_sublayer(tape, h, p + ".attn", 1, n);
  x = tape.add(x, h);
  ag::Node* f = tape.layer_norm(x, param(p + ".ln_f.gamma"), param(p + ".ln_f.beta"));
  f = ff_sublayer(tape, f, p + ".ff", train, dropout_rng);
  return tape.add(x, f);
}

ag::Node* ActionPoseModel::text_encode(ag::Tape& tape, const std::vector<std::int32_t>& ids,
                                       bool train, Rng* dropout_rng) {
  if (ids.empty() || ids.front() != Tokenizer::kCls || ids.back() != Tokenizer::kSep) {
    throw ValidationError("text_encode: token sequence must be <CLS> ... <SEP>");
  }
  if (static_cast<int>(ids.size()) > config_.text_max_tokens) {
    throw ValidationError("text_encode: token sequence longer than text_max_tokens");
  }
  std::vector<int> int_ids(ids.begin(), ids.end());
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  ag::Node* x = tape.embed(param("text.embed"), int_ids);
  x = tape.add_table_rows(x, param("text.pe"), positions);
  if (train && config_.dropout > 0.0 && dropout_rng) {
    x = tape.dropout(x, config_.dropout, *dropout_rng, true);
  }
  for (int i = 0; i < config_.l3; ++i) {
    x = text_block(tape, x, i, train, dropout_rng);
  }
  return tape.layer_norm(x, param("text.final_ln.gamma"), param("text.final_ln.beta"));
}

ag::Node* ActionPoseModel::pool_text(ag::Tape& tape, ag::Node* text_features, bool train,
                                     Rng* dropout_rng) {
  ag::Node* h = tape.row_gather(text_features, {0});  // <CLS>
  h = tape.linear(h, param("text_pool.l1.w"), &param("text_pool.l1.b"));
  h = tape.gelu(h);
  h = tape.layer_norm(h, param("text_pool.ln1.gamma"), param("text_pool.ln1.beta"));
  if (train && config_.dropout > 0.0 && dropout_rng) {
    h = tape.dropout(h, config_.dropout, *dropout_rng, true);
  }
  h = tape.linear(h, param("text_pool.out.w"), &param("text_pool.out.b"));
  return tape.normalize_rows(h);
}

ag::Node* ActionPoseModel::regress_3d(ag::Tape& tape, ag::Node* final_tap, int batch,
                                      int frames) {
  const int j = config_.joints;
  std::vector<int> keep(static_cast<std::size_t>(batch) * frames * j);
  std::size_t at = 0;
  for (int b = 0; b < batch; ++b) {
    for (int t = 1; t <= frames; ++t) {
      for (int ji = 0; ji < j; ++ji) {
        keep[at++] = (b * (frames + 1) + t) * j + ji;
      }
    }
  }
  ag::Node* h = tape.row_gather(final_tap, keep);
  return tape.linear(h, param("head.w"), &param("head.b"));
}

ag::Matrix ActionPoseModel::embed_pose(const PoseSeq2D& seq) {
  ag::Tape tape;
  PoseBatch batch{1, seq.frames, seq.data};
  const PoseTaps taps = pose_encode(tape, batch, false, nullptr);
  return pool_pose(tape, taps.mid, 1)->val;
}

ag::Matrix ActionPoseModel::predict_3d(const PoseSeq2D& seq) {
  ag::Tape tape;
  PoseBatch batch{1, seq.frames, seq.data};
  const PoseTaps taps = pose_encode(tape, batch, false, nullptr);
  return regress_3d(tape, taps.final, 1, seq.frames)->val;
}

// ---------------------------------------------------------------------------
// checkpoint io

void ActionPoseModel::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path);
  binio::write_bytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::write_u32(os, 1u);  // format version
  const auto kv = config_.to_kv();
  binio::write_u32(os, static_cast<std::uint32_t>(kv.size()));
  for (const auto& [key, value] : kv) {
    binio::write_string(os, key);
    binio::write_string(os, value);
  }
  binio::write_u32(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& p : params_) {
    binio::write_string(os, p->name);
    binio::write_u32(os, static_cast<std::uint32_t>(p->value.rows()));
    binio::write_u32(os, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        binio::write_f32(os, static_cast<float>(p->value(r, c)));
      }
    }
  }
}

namespace {

struct CheckpointData {
  ModelConfig config;
  std::vector<std::pair<std::string, ag::Matrix>> tensors;
};

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  binio::read_bytes(is, magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError("bad checkpoint magic: " + path);
  }
  const auto version = binio::read_u32(is);
  if (version != 1) throw IoError("unsupported checkpoint version");
  std::map<std::string, std::string> kv;
  const auto n_kv = binio::read_u32(is);
  for (std::uint32_t i = 0; i < n_kv; ++i) {
    const std::string key = binio::read_string(is);
    kv[key] = binio::read_string(is);
  }
  CheckpointData out;
  out.config = ModelConfig::from_kv(kv);
  const auto n_params = binio::read_u32(is);
  out.tensors.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = binio::read_string(is);
    const auto rows = binio::read_u32(is);
    const auto cols = binio::read_u32(is);
    ag::Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = binio::read_f32(is);
    }
    out.tensors.emplace_back(name, std::move(m));
  }
  return out;
}

}  // namespace

ActionPoseModel ActionPoseModel::load_checkpoint(const std::string& path) {
  CheckpointData data = read_checkpoint(path);
  ActionPoseModel model(data.config, 0);
  std::set<std::string> seen;
  std::vector<std::string> mismatched;
  for (auto& [name, tensor] : data.tensors) {
    const auto it = model.by_name_.find(name);
    if (it == model.by_name_.end() || it->second->value.rows() != tensor.rows() ||
        it->second->value.cols() != tensor.cols()) {
      mismatched.push_back(name);
      continue;
    }
    it->second->value = tensor;
    seen.insert(name);
  }
  for (const auto& p : model.params_) {
    if (!seen.count(p->name)) mismatched.push_back(p->name);
  }
  if (!mismatched.empty()) {
    std::string msg = "checkpoint incompatible; mismatched parameters:";
    for (const auto& n : mismatched) msg += " " + n;
    throw ValidationError(msg);
  }
  return model;
}

void ActionPoseModel::load_parameters(const std::string& path) {
  ActionPoseModel loaded = load_checkpoint(path);
  std::vector<std::string> mismatched;
  for (const auto& p : loaded.params_) {
    const auto it = by_name_.find(p->name);
    if (it == by_name_.end() || it->second->value.rows() != p->value.rows() ||
        it->second->value.cols() != p->value.cols()) {
      mismatched.push_back(p->name);
    }
  }
  if (loaded.params_.size() != params_.size() || !mismatched.empty()) {
    std::string msg = "checkpoint incompatible with this configuration;";
    msg += " mismatched parameters:";
    for (const auto& n : mismatched) msg += " " + n;
    throw ValidationError(msg);
  }
  for (const auto& p : loaded.params_) by_name_[p->name]->value = p->value;
}

}  // namespace actionpose
