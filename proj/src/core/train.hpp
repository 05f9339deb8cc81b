#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/model.hpp"
#include "core/synthdata.hpp"

namespace mc::train {

struct TrainConfig {
  int64_t epochs = 5;
  double lr = 3e-3;            // peak learning rate, reached at warmup_steps
  int64_t warmup_steps = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  double alpha = 0.3;  // CTC share of the token objective
  double beta = 1.0;   // length-prediction weight
  double grad_clip = 5.0;  // global-norm cap; 0 disables
  uint64_t seed = 0;       // shuffling + masking + dropout streams
  std::string out_dir = "checkpoints";

  void validate() const;
  static TrainConfig from_config(const Config& cfg);  // train.* keys
  void write_to(Config& cfg) const;
};

// Linear warmup to cfg.lr over warmup_steps, then inverse-square-root decay;
// continuous at the junction. step is 1-based.
double learning_rate(const TrainConfig& cfg, int64_t step);

// Scales all parameter gradients so their global L2 norm is at most
// max_norm (no-op if max_norm <= 0); returns the pre-clip norm.
double clip_gradients(std::vector<NamedParam>& params, double max_norm);

// Adam over the model's parameters, with state that serializes into
// checkpoints ("opt.m.<param>", "opt.v.<param>", "opt.step") so a resumed
// run continues bitwise.
class Adam {
 public:
  Adam(Model& model, const TrainConfig& cfg);

  void step(double lr);  // consumes current grads
  void zero_grad();
  int64_t steps_taken() const { return t_; }

  void append_state(Checkpoint& ckpt) const;
  // Restores moments and the step counter; data_error if the checkpoint
  // carries no optimizer state or it does not match the parameter set.
  void load_state(const Checkpoint& ckpt);
  static bool has_state(const Checkpoint& ckpt);

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double b1_, b2_, eps_;
  int64_t t_ = 0;
};

struct EpochStats {
  int64_t epoch = 0;  // 1-based
  double ctc = 0.0, mlm = 0.0, dlp = 0.0, combined = 0.0;  // per-utterance means
  int64_t n_used = 0;
  int64_t n_skipped = 0;  // CTC-infeasible utterances
};

struct TrainResult {
  std::vector<std::string> epoch_checkpoints;  // out_dir/epoch-%03d.mckp
  std::string averaged_checkpoint;             // out_dir/averaged.mckp
  std::vector<EpochStats> stats;               // epochs run in this call
};

// Trains the model in place for cfg.epochs epochs, one utterance per step,
// writing a checkpoint after each epoch and a parameter average over all
// epoch checkpoints at the end. If out_dir already holds epoch files, training
// resumes after the newest one — reproducing the unresumed run bitwise, since
// every random draw is keyed on (seed, epoch, utterance index) alone.
TrainResult train(Model& model, const std::vector<Utterance>& corpus,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace mc::train
