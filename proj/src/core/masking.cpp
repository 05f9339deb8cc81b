#include "core/masking.hpp"

#include <algorithm>

#include "core/ops.hpp"

namespace mc::masking {

namespace {

// N distinct positions out of L, uniformly, sorted. Partial Fisher-Yates on
// an index array keeps the draw count at exactly n.
std::vector<int64_t> sample_positions(int64_t l, int64_t n, Rng& rng) {
  std::vector<int64_t> idx(static_cast<size_t>(l));
  for (int64_t i = 0; i < l; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = 0; i < n; ++i)
    std::swap(idx[static_cast<size_t>(i)],
              idx[static_cast<size_t>(rng.uniform_int(i, l - 1))]);
  idx.resize(static_cast<size_t>(n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct MaskRun {
  int64_t start = 0;   // first masked position in the original sequence
  int64_t length = 0;  // run length
};

std::vector<MaskRun> mask_runs(const std::vector<int64_t>& positions) {
  std::vector<MaskRun> runs;
  for (int64_t p : positions) {
    if (!runs.empty() && runs.back().start + runs.back().length == p) {
      ++runs.back().length;
    } else {
      runs.push_back({p, 1});
    }
  }
  return runs;
}

}  // namespace

MaskedSequence mask_positions(const std::vector<int64_t>& y,
                              std::vector<int64_t> positions, int64_t mask_id) {
  std::sort(positions.begin(), positions.end());
  MC_CHECK(std::adjacent_find(positions.begin(), positions.end()) == positions.end(),
           "duplicate mask position");
  MaskedSequence out;
  out.tokens = y;
  out.masked_positions = std::move(positions);
  size_t next = 0;
  for (int64_t i = 0; i < static_cast<int64_t>(y.size()); ++i) {
    if (next < out.masked_positions.size() && out.masked_positions[next] == i) {
      MC_CHECK(i >= 0 && i < static_cast<int64_t>(y.size()), "mask position out of range");
      out.tokens[static_cast<size_t>(i)] = mask_id;
      ++next;
    } else {
      out.observed_positions.push_back(i);
    }
  }
  MC_CHECK(next == out.masked_positions.size(), "mask position out of range");
  return out;
}

MaskedSequence sample_mlm_mask(const std::vector<int64_t>& y, Rng& rng,
                               int64_t mask_id) {
  const int64_t l = static_cast<int64_t>(y.size());
  MC_CHECK(l >= 1, "cannot mask an empty sequence");
  const int64_t n_mask = rng.uniform_int(1, l);
  return mask_positions(y, sample_positions(l, n_mask, rng), mask_id);
}

DlpSample make_deletion_sample(const std::vector<int64_t>& y, Rng& rng,
                               int64_t mask_id, int64_t max_class) {
  const int64_t l = static_cast<int64_t>(y.size());
  MC_CHECK(l >= 1, "cannot mask an empty sequence");
  MC_CHECK(max_class >= 1, "max_class must be positive");

  // The class cap forces a policy for runs longer than max_class: retry a few
  // times, then split oversized runs into chunks of at most max_class, each
  // chunk becoming its own mask.
  //
  // Mask-count draw: mostly sparse (density <= 1/2) with an occasional
  // full-range draw. At inference a mask nearly always covers one or two
  // tokens, and a dense draw floods training with long-run labels, starving
  // class 1 until the length head deletes real tokens.
  std::vector<MaskRun> runs;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const int64_t n_mask = rng.uniform() < 0.75
                               ? rng.uniform_int(1, (l + 1) / 2)
                               : rng.uniform_int(1, l);
    runs = mask_runs(sample_positions(l, n_mask, rng));
    const bool ok = std::all_of(runs.begin(), runs.end(), [&](const MaskRun& r) {
      return r.length <= max_class;
    });
    if (ok) break;
  }
  std::vector<MaskRun> chunked;
  for (const auto& run : runs) {
    int64_t at = run.start, left = run.length;
    while (left > 0) {
      const int64_t take = std::min(left, max_class);
      chunked.push_back({at, take});
      at += take;
      left -= take;
    }
  }

  DlpSample sample;
  sample.kind = DlpSample::Kind::deletion;
  // Build the merged sequence: each run contributes one mask token.
  size_t next_run = 0;
  for (int64_t i = 0; i < l; ++i) {
    if (next_run < chunked.size() && chunked[next_run].start == i) {
      sample.masked.masked_positions.push_back(
          static_cast<int64_t>(sample.masked.tokens.size()));
      sample.masked.tokens.push_back(mask_id);
      sample.length_labels.push_back(chunked[next_run].length);
      i += chunked[next_run].length - 1;
      ++next_run;
    } else {
      sample.masked.observed_positions.push_back(
          static_cast<int64_t>(sample.masked.tokens.size()));
      sample.masked.tokens.push_back(y[static_cast<size_t>(i)]);
    }
  }
  return sample;
}

DlpSample make_insertion_sample(const std::vector<int64_t>& y, Rng& rng,
                                int64_t mask_id) {
  const int64_t l = static_cast<int64_t>(y.size());
  const int64_t k_max = std::max<int64_t>(1, (l + 3) / 4);  // ceil(L/4)
  const int64_t k = rng.uniform_int(1, k_max);

  // Draw a gap in 0..L for each insertion (gap g sits before position g);
  // multiple insertions may share a gap and then sit adjacent.
  std::vector<int64_t> gaps(static_cast<size_t>(k));
  for (auto& g : gaps) g = rng.uniform_int(0, l);
  std::sort(gaps.begin(), gaps.end());

  DlpSample sample;
  sample.kind = DlpSample::Kind::insertion;
  size_t next_gap = 0;
  for (int64_t i = 0; i <= l; ++i) {
    while (next_gap < gaps.size() && gaps[next_gap] == i) {
      sample.masked.masked_positions.push_back(
          static_cast<int64_t>(sample.masked.tokens.size()));
      sample.masked.tokens.push_back(mask_id);
      sample.length_labels.push_back(0);
      ++next_gap;
    }
    if (i < l) {
      sample.masked.observed_positions.push_back(
          static_cast<int64_t>(sample.masked.tokens.size()));
      sample.masked.tokens.push_back(y[static_cast<size_t>(i)]);
    }
  }
  return sample;
}

Tensor mlm_loss(const Tensor& token_log_probs, const MaskedSequence& masked,
                const std::vector<int64_t>& reference) {
  MC_CHECK_SHAPE(token_log_probs.ndim() == 2 &&
                     token_log_probs.size(0) == static_cast<int64_t>(masked.tokens.size()),
                 "token log-probs must have one row per masked-sequence position");
  MC_CHECK(reference.size() == masked.tokens.size(),
           "reference length must match the masked sequence");
  if (masked.masked_positions.empty()) return Tensor::scalar(0.0);

  std::vector<int64_t> targets;
  targets.reserve(masked.masked_positions.size());
  for (int64_t pos : masked.masked_positions)
    targets.push_back(reference[static_cast<size_t>(pos)]);
  Tensor rows = gather_rows(token_log_probs, masked.masked_positions);
  return cross_entropy_from_log_probs(rows, targets);
}

Tensor dlp_loss(const Tensor& length_log_probs, const DlpSample& sample) {
  MC_CHECK_SHAPE(length_log_probs.ndim() == 2 &&
                     length_log_probs.size(0) ==
                         static_cast<int64_t>(sample.masked.tokens.size()),
                 "length log-probs must have one row per sample position");
  const int64_t n_classes = length_log_probs.size(1);
  MC_CHECK(sample.length_labels.size() == sample.masked.masked_positions.size(),
           "one length label per masked position required");
  for (int64_t label : sample.length_labels)
    MC_CHECK(label >= 0 && label < n_classes,
             "length label " + std::to_string(label) + " outside class range");
  if (sample.masked.masked_positions.empty()) return Tensor::scalar(0.0);

  Tensor rows = gather_rows(length_log_probs, sample.masked.masked_positions);
  return cross_entropy_from_log_probs(rows, sample.length_labels);
}

Tensor combined_loss(const Tensor& ctc_nll, const Tensor& mlm_nll,
                     const Tensor& dlp_nll, double alpha, double beta) {
  MC_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  MC_CHECK(beta > 0.0, "beta must be positive");
  return add(add(scale(ctc_nll, alpha), scale(mlm_nll, 1.0 - alpha)),
             scale(dlp_nll, beta));
}

}  // namespace mc::masking
