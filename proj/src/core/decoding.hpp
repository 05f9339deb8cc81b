#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/ctc.hpp"
#include "core/model.hpp"

namespace mc::decoding {

enum class Strategy {
  ctc_greedy,     // collapse the frame-argmax path, no decoder
  maskctc,        // mask low-confidence CTC tokens, fill iteratively
  shrink_expand,  // maskctc + mask-count editing via the length head
  mask_predict,   // start from all masks, anneal the re-mask budget
  restricted_mp,  // mask-predict whose re-mask budget is capped by the
                  // initial CTC mask count
};

Strategy strategy_from_string(const std::string& name);  // value_error on unknown
std::string strategy_name(Strategy s);

struct DecodeConfig {
  Strategy strategy = Strategy::maskctc;
  int64_t K = 10;        // refinement iterations
  double p_thres = 0.99; // masking threshold on token confidence
  int64_t max_loop = 0;  // shrink_expand safety bound; 0 means 2*K
  int64_t target_len = 0;  // mask_predict start length; 0 derives from CTC
  bool recompute_c = false;  // refresh C from the current mask count per step

  void validate() const;
  // Strategy defaults differ only in p_thres: confidence filtering of CTC
  // outputs wants 0.99, decoder-probability masking wants 0.5.
  static DecodeConfig for_strategy(Strategy s);
  static DecodeConfig from_config(const Config& cfg);  // decode.* keys
  void write_to(Config& cfg) const;
};

struct DecodeTrace {
  struct Fill {
    int64_t position = 0;
    int64_t token = 0;
    double prob = 0.0;
  };
  struct Iteration {
    std::vector<int64_t> masked_positions;     // masks entering the step
    std::vector<int64_t> length_predictions;   // shrink_expand: one per mask
    std::vector<Fill> filled;
  };

  std::string strategy;
  std::vector<Iteration> iterations;
  int64_t decoder_forward_count = 0;
  int64_t encoder_forward_count = 0;
  int64_t initial_mask_count = 0;
  bool force_filled = false;  // loop bound hit with masks left over
};

struct DecodeResult {
  std::vector<int64_t> tokens;
  DecodeTrace trace;
};

// Pure mask-sequence edits, exposed for direct testing. shrink merges every
// run of consecutive masks into one; expand rewrites the i-th mask into
// lengths[i] masks (0 deletes it), never touching observed tokens, and caps
// the output at max_len items by clipping expansions left to right.
std::vector<int64_t> shrink_masks(const std::vector<int64_t>& seq, int64_t mask_id);
std::vector<int64_t> expand_masks(const std::vector<int64_t>& seq,
                                  const std::vector<int64_t>& lengths,
                                  int64_t mask_id, int64_t max_len);

// Strategy bodies, each taking a precomputed encoding (and CTC greedy result
// where the strategy starts from one). Traces count decoder forwards only;
// the dispatcher adds the encoder pass.
DecodeResult decode_maskctc(const Model& model, const Tensor& enc,
                            const ctc::GreedyResult& ctc_out,
                            const DecodeConfig& cfg);
DecodeResult decode_shrink_expand(const Model& model, const Tensor& enc,
                                  const ctc::GreedyResult& ctc_out,
                                  const DecodeConfig& cfg);
DecodeResult decode_mask_predict(const Model& model, const Tensor& enc,
                                 int64_t target_len, const DecodeConfig& cfg);
DecodeResult decode_restricted_mp(const Model& model, const Tensor& enc,
                                  const ctc::GreedyResult& ctc_out,
                                  const DecodeConfig& cfg);

// Full pipeline: encode, CTC greedy, dispatch on cfg.strategy.
DecodeResult decode(const Model& model, const Tensor& features,
                    const DecodeConfig& cfg);

// One JSON object (no trailing newline) for line-delimited trace logs.
std::string trace_to_json_line(const std::string& utt_id, const DecodeTrace& trace);

}  // namespace mc::decoding
