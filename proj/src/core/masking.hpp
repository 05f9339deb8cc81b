#pragma once

#include <cstdint>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mc::masking {

struct MaskedSequence {
  std::vector<int64_t> tokens;              // mask_id at masked slots
  std::vector<int64_t> masked_positions;    // sorted, ascending
  std::vector<int64_t> observed_positions;  // sorted, ascending
};

// Replace the given positions of y with mask_id.
MaskedSequence mask_positions(const std::vector<int64_t>& y,
                              std::vector<int64_t> positions, int64_t mask_id);

// MLM training mask: N_mask ~ Uniform{1..L}, then N_mask distinct positions
// chosen uniformly.
MaskedSequence sample_mlm_mask(const std::vector<int64_t>& y, Rng& rng,
                               int64_t mask_id);

struct DlpSample {
  enum class Kind { deletion, insertion };
  Kind kind = Kind::deletion;
  MaskedSequence masked;
  // One label per entry of masked.masked_positions, in the same order.
  // deletion: label = merged run length (>= 1); insertion: label = 0.
  std::vector<int64_t> length_labels;
};

// Deletion-simulated task: sample a mask as above, merge each run of
// consecutive masks into a single mask labeled with the run length. Runs
// longer than max_class trigger a bounded resample, then a chunked split.
DlpSample make_deletion_sample(const std::vector<int64_t>& y, Rng& rng,
                               int64_t mask_id, int64_t max_class = 50);

// Insertion-simulated task: k ~ Uniform{1..max(1, ceil(L/4))} masks inserted
// at uniformly chosen gaps (both ends allowed), every inserted mask labeled 0.
DlpSample make_insertion_sample(const std::vector<int64_t>& y, Rng& rng,
                                int64_t mask_id);

// Negative log-likelihood of the reference tokens at masked positions only.
// token_log_probs is [L x V_real] over the masked sequence's positions.
Tensor mlm_loss(const Tensor& token_log_probs, const MaskedSequence& masked,
                const std::vector<int64_t>& reference);

// Cross-entropy of the length classes at the sample's masked positions.
// length_log_probs is [L x (max_class+1)] over the sample's positions.
Tensor dlp_loss(const Tensor& length_log_probs, const DlpSample& sample);

// alpha * ctc_nll + (1 - alpha) * mlm_nll + beta * dlp_nll.
Tensor combined_loss(const Tensor& ctc_nll, const Tensor& mlm_nll,
                     const Tensor& dlp_nll, double alpha, double beta);

}  // namespace mc::masking
