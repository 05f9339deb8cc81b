#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace mc::ctc {

// Path-to-output collapse: merge adjacent duplicates, then remove blanks.
std::vector<int64_t> collapse(const std::vector<int64_t>& path, int64_t blank_id);

// Standard CTC feasibility: the shortest path emitting y needs
// len(y) + #adjacent-repeats frames.
bool feasible(int64_t n_frames, const std::vector<int64_t>& y);

// log P(y | X) via the forward DP over the blank-interleaved label sequence,
// computed in log space on plain doubles (no gradient). `log_posteriors` is
// [T' x (n_real+1)] with the blank in the last column; each row must be a
// log-distribution. Infeasible y returns -inf rather than raising so batch
// training can skip.
double ctc_log_prob(const Tensor& log_posteriors, const std::vector<int64_t>& y,
                    int64_t blank_id);

// Test-only oracle: sums P(A|X) over every alignment A with collapse(A) == y
// by exhaustive enumeration of all (|V|+1)^T' paths. Guarded to T' <= 8 and
// |V| <= 4.
double ctc_log_prob_oracle(const Tensor& log_posteriors,
                           const std::vector<int64_t>& y, int64_t blank_id);

// Same enumeration, returning the probability (not log) of every distinct
// collapsed output; values sum to 1 over the whole map.
std::map<std::vector<int64_t>, double> ctc_output_distribution_oracle(
    const Tensor& log_posteriors, int64_t blank_id);

// -log P(y | X) as a differentiable graph node over `log_posteriors`. The DP
// runs on tensor ops; impossible states carry a -1e30 sentinel whose exp
// underflows to exactly zero, so no gradient leaks through them. Infeasible
// y yields a constant +inf tensor with no graph attached.
Tensor ctc_loss(const Tensor& log_posteriors, const std::vector<int64_t>& y,
                int64_t blank_id);

struct GreedyResult {
  std::vector<int64_t> tokens;
  std::vector<double> confidences;  // max posterior over the token's span, in [0,1]
  std::vector<std::pair<int64_t, int64_t>> frame_spans;  // inclusive (start, end)
};

// Per-frame argmax path, collapsed, with spans and per-token confidences.
GreedyResult greedy_decode(const Tensor& log_posteriors, int64_t blank_id);

}  // namespace mc::ctc
