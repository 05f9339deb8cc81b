#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mc {

// Controls the synthetic utterance generator: each real token owns a fixed
// prototype feature vector which is emitted dup in [dup_min, dup_max] times
// per occurrence, tokens are separated by 0+ zero-vector silence frames, and
// Gaussian noise is added on top.
struct SynthConfig {
  int64_t vocab_size = 10;
  int64_t min_len = 3;
  int64_t max_len = 8;
  int64_t dup_min = 2;
  int64_t dup_max = 3;
  int64_t sil_min = 0;
  int64_t sil_max = 2;
  double noise_std = 0.1;
  int64_t feature_dim = 8;
  uint64_t seed = 0;
  // Prototypes depend only on this, vocab_size, and feature_dim, so corpora
  // with different utterance seeds (train vs. stress/test splits) still
  // describe the same "acoustics".
  uint64_t proto_seed = 7;

  void validate() const;
  static SynthConfig from_config(const Config& cfg);  // data.* keys
  void write_to(Config& cfg) const;
};

struct Utterance {
  std::string id;
  Tensor features;  // [T x feature_dim]
  std::vector<int64_t> reference;
};

// [vocab_size x feature_dim] standard-normal prototype per real token.
Tensor make_prototypes(const SynthConfig& cfg);

// Deterministic per cfg.seed; utterance i draws from its own substream, so
// corpora of different sizes agree on their common prefix.
std::vector<Utterance> generate_corpus(const SynthConfig& cfg, int64_t n);

// Applies exactly n_sub substitutions (always to a different token), n_del
// deletions — at distinct random positions — then n_ins insertions of random
// tokens at random gaps. Token alphabet is 0..n_real-1.
std::vector<int64_t> corrupt_reference(const std::vector<int64_t>& y, int64_t n_real,
                                       Rng& rng, int64_t n_sub, int64_t n_del,
                                       int64_t n_ins);

// On-disk corpus: <dir>/manifest.jsonl with one record per utterance (id,
// reference ids, frame count, feature dim, byte offset) plus
// <dir>/features.bin holding all frames as packed little-endian float64.
void save_corpus(const std::string& dir, const std::vector<Utterance>& corpus);
std::vector<Utterance> load_corpus(const std::string& dir);

}  // namespace mc
