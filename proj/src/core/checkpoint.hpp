#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace mc {

// Versioned binary model container: "MCKP" magic, format version, a JSON
// header (model config, vocabulary, seed, progress counters, free-form
// metadata), then named little-endian float64 blobs. Round-trips are
// bit-exact.
struct Checkpoint {
  static constexpr uint32_t kFormatVersion = 1;

  ModelConfig model;
  std::vector<std::string> vocab_tokens;  // real tokens only; specials are implied
  uint64_t seed = 0;
  int64_t epoch = 0;
  int64_t step = 0;
  std::map<std::string, std::string> extra;

  struct Blob {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Blob> blobs;  // model parameters, plus any optimizer state

  const Blob* find(const std::string& name) const;
};

// Snapshots every parameter of the model. Optimizer state, if any, is the
// caller's to append.
Checkpoint checkpoint_from_model(const Model& model, int64_t epoch, int64_t step);

// Rebuilds the model recorded in the checkpoint (same config, vocabulary and
// init seed) and overwrites its parameters with the stored blobs. Blobs that
// do not name a parameter (e.g. "opt.*") are ignored; a parameter with no
// blob is a data error.
Model model_from_checkpoint(const Checkpoint& ckpt);

// Copies parameter blobs into an existing, identically-shaped model.
void load_parameters(const Checkpoint& ckpt, Model& model);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Elementwise parameter average. Computed as first + mean(delta from first)
// so averaging k copies of one checkpoint reproduces it bitwise. Metadata is
// taken from the last checkpoint; optimizer blobs are dropped.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts);

}  // namespace mc
