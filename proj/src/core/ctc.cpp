#include "core/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/ops.hpp"

namespace mc::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Sentinel for impossible DP states on the differentiable path. exp of
// (kLogZero - anything finite) underflows to exactly 0.0, which keeps
// gradients from leaking into unreachable states while avoiding inf-inf NaNs
// inside the graph.
constexpr double kLogZero = -1e30;

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double lse3(double a, double b, double c) { return lse2(lse2(a, b), c); }

// Blank-interleaved extended label sequence: [ε, y1, ε, y2, ..., yL, ε].
std::vector<int64_t> extend_labels(const std::vector<int64_t>& y, int64_t blank_id) {
  std::vector<int64_t> ext;
  ext.reserve(2 * y.size() + 1);
  ext.push_back(blank_id);
  for (int64_t tok : y) {
    ext.push_back(tok);
    ext.push_back(blank_id);
  }
  return ext;
}

int64_t adjacent_repeats(const std::vector<int64_t>& y) {
  int64_t r = 0;
  for (size_t i = 1; i < y.size(); ++i)
    if (y[i] == y[i - 1]) ++r;
  return r;
}

void check_posteriors(const Tensor& log_posteriors, int64_t blank_id) {
  MC_CHECK_SHAPE(log_posteriors.ndim() == 2, "posteriors must be [T' x (V+1)]");
  MC_CHECK(blank_id >= 0 && blank_id < log_posteriors.size(1),
           "blank id outside posterior columns");
}

}  // namespace

std::vector<int64_t> collapse(const std::vector<int64_t>& path, int64_t blank_id) {
  std::vector<int64_t> out;
  int64_t prev = std::numeric_limits<int64_t>::min();  // matches nothing
  for (int64_t sym : path) {
    if (sym != prev && sym != blank_id) out.push_back(sym);
    prev = sym;
  }
  return out;
}

bool feasible(int64_t n_frames, const std::vector<int64_t>& y) {
  return n_frames >= static_cast<int64_t>(y.size()) + adjacent_repeats(y);
}

double ctc_log_prob(const Tensor& log_posteriors, const std::vector<int64_t>& y,
                    int64_t blank_id) {
  check_posteriors(log_posteriors, blank_id);
  const int64_t t_len = log_posteriors.size(0);
  const int64_t n_cols = log_posteriors.size(1);
  for (int64_t tok : y)
    MC_CHECK(tok >= 0 && tok < n_cols && tok != blank_id,
             "label outside real-token columns");
  if (!feasible(t_len, y)) return kNegInf;

  const auto lp = log_posteriors.data();
  const auto ext = extend_labels(y, blank_id);
  const int64_t s_len = static_cast<int64_t>(ext.size());

  std::vector<double> prev(s_len, kNegInf), cur(s_len, kNegInf);
  prev[0] = lp[0 * n_cols + blank_id];
  if (s_len > 1) prev[1] = lp[0 * n_cols + ext[1]];

  for (int64_t t = 1; t < t_len; ++t) {
    for (int64_t s = 0; s < s_len; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = lse2(acc, prev[s - 1]);
      if (s >= 2 && ext[s] != blank_id && ext[s] != ext[s - 2])
        acc = lse2(acc, prev[s - 2]);
      cur[s] = acc + lp[t * n_cols + ext[s]];
    }
    std::swap(prev, cur);
  }

  return s_len == 1 ? prev[0] : lse2(prev[s_len - 1], prev[s_len - 2]);
}

namespace {

void enumeration_guard(const Tensor& log_posteriors, int64_t blank_id) {
  check_posteriors(log_posteriors, blank_id);
  MC_CHECK(log_posteriors.size(0) <= 8,
           "enumeration oracle limited to T' <= 8 frames");
  MC_CHECK(log_posteriors.size(1) - 1 <= 4,
           "enumeration oracle limited to |V| <= 4 real tokens");
}

// Walks every path in probability space, handing (path, prob) to the sink.
template <typename Sink>
void enumerate_paths(const Tensor& log_posteriors, Sink&& sink) {
  const int64_t t_len = log_posteriors.size(0);
  const int64_t n_cols = log_posteriors.size(1);
  const auto lp = log_posteriors.data();
  std::vector<int64_t> path(static_cast<size_t>(t_len), 0);
  // Odometer over n_cols^t_len paths.
  while (true) {
    double p = 1.0;
    for (int64_t t = 0; t < t_len; ++t) p *= std::exp(lp[t * n_cols + path[t]]);
    sink(path, p);
    int64_t t = t_len - 1;
    while (t >= 0 && ++path[t] == n_cols) path[t--] = 0;
    if (t < 0) break;
  }
}

}  // namespace

double ctc_log_prob_oracle(const Tensor& log_posteriors,
                           const std::vector<int64_t>& y, int64_t blank_id) {
  enumeration_guard(log_posteriors, blank_id);
  double total = 0.0;
  enumerate_paths(log_posteriors, [&](const std::vector<int64_t>& path, double p) {
    if (collapse(path, blank_id) == y) total += p;
  });
  return total == 0.0 ? kNegInf : std::log(total);
}

std::map<std::vector<int64_t>, double> ctc_output_distribution_oracle(
    const Tensor& log_posteriors, int64_t blank_id) {
  enumeration_guard(log_posteriors, blank_id);
  std::map<std::vector<int64_t>, double> dist;
  enumerate_paths(log_posteriors, [&](const std::vector<int64_t>& path, double p) {
    dist[collapse(path, blank_id)] += p;
  });
  return dist;
}

Tensor ctc_loss(const Tensor& log_posteriors, const std::vector<int64_t>& y,
                int64_t blank_id) {
  check_posteriors(log_posteriors, blank_id);
  const int64_t t_len = log_posteriors.size(0);
  const int64_t n_cols = log_posteriors.size(1);
  for (int64_t tok : y)
    MC_CHECK(tok >= 0 && tok < n_cols && tok != blank_id,
             "label outside real-token columns");
  if (!feasible(t_len, y))
    return Tensor::scalar(std::numeric_limits<double>::infinity());

  const auto ext = extend_labels(y, blank_id);
  const int64_t s_len = static_cast<int64_t>(ext.size());

  // Per-state emission scores: E[t][s] = log_posteriors[t][ext[s]].
  Tensor emis = gather_cols(log_posteriors, ext);  // [T' x S]

  // Constant masks (no grad). init: only states 0 and 1 can start.
  std::vector<double> init_mask(static_cast<size_t>(s_len), kLogZero);
  init_mask[0] = 0.0;
  if (s_len > 1) init_mask[1] = 0.0;
  // skip transition allowed only onto a non-blank that differs from s-2.
  std::vector<double> skip_mask(static_cast<size_t>(s_len), kLogZero);
  for (int64_t s = 2; s < s_len; ++s)
    if (ext[s] != blank_id && ext[s] != ext[s - 2]) skip_mask[s] = 0.0;

  Tensor pad1 = Tensor::full({1}, kLogZero);
  Tensor pad2 = Tensor::full({2}, kLogZero);
  Tensor init = Tensor::from_vector({s_len}, std::move(init_mask));
  Tensor skip_allow = Tensor::from_vector({s_len}, std::move(skip_mask));

  Tensor alpha = add(reshape(slice(emis, 0, 0, 1), {s_len}), init);
  for (int64_t t = 1; t < t_len; ++t) {
    Tensor stay = alpha;
    Tensor left = concat({pad1, slice(alpha, 0, 0, s_len - 1)}, 0);
    Tensor from = stack({stay, left});
    if (s_len > 2) {
      Tensor skip = add(concat({pad2, slice(alpha, 0, 0, s_len - 2)}, 0), skip_allow);
      from = stack({stay, left, skip});
    }
    alpha = add(logsumexp(from, 0), reshape(slice(emis, 0, t, t + 1), {s_len}));
  }

  Tensor fin = s_len == 1 ? alpha : logsumexp(slice(alpha, 0, s_len - 2, s_len), 0);
  return neg(reshape(fin, {}));
}

GreedyResult greedy_decode(const Tensor& log_posteriors, int64_t blank_id) {
  check_posteriors(log_posteriors, blank_id);
  const int64_t t_len = log_posteriors.size(0);
  const auto path = argmax_rows(log_posteriors);
  const auto lp = log_posteriors.data();
  const int64_t n_cols = log_posteriors.size(1);

  GreedyResult out;
  int64_t t = 0;
  while (t < t_len) {
    const int64_t sym = path[static_cast<size_t>(t)];
    int64_t end = t;
    while (end + 1 < t_len && path[static_cast<size_t>(end + 1)] == sym) ++end;
    if (sym != blank_id) {
      double best = 0.0;
      for (int64_t u = t; u <= end; ++u)
        best = std::max(best, std::exp(lp[u * n_cols + sym]));
      out.tokens.push_back(sym);
      out.confidences.push_back(best);
      out.frame_spans.emplace_back(t, end);
    }
    t = end + 1;
  }
  return out;
}

}  // namespace mc::ctc
