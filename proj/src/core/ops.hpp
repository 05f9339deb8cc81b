#pragma once

#include <span>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mc {

// ---- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // 2-D only
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t stop);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor stack(const std::vector<Tensor>& xs);  // new leading axis

// ---- elementwise (numpy-style broadcasting on binary ops) ------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor shift(const Tensor& x, double c);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor swish(const Tensor& x);  // x * sigmoid(x)

// ---- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n] -> [m×n]

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);
Tensor logsumexp(const Tensor& x, int axis, bool keepdim = false);

// Max-shifted for stability: safe for inputs like [1000, 0]. exp(out) sums
// to one along `axis`; outputs are always <= 0.
Tensor log_softmax(const Tensor& x, int axis);
Tensor softmax(const Tensor& x, int axis);

// ---- indexing ---------------------------------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& rows);  // [N×C] -> [M×C]
Tensor gather_cols(const Tensor& x, const std::vector<int64_t>& cols);  // [N×C] -> [N×M]
Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx);  // [N×C] -> [N]

// Row lookup into a [V×d] table; gradient scatter-adds into the table.
Tensor embedding(const Tensor& table, const std::vector<int64_t>& ids);

// ---- network ops ------------------------------------------------------------

// Inverted dropout: train-mode only, kept activations scaled by 1/(1-p).
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Normalizes over the last axis; gain/bias are [C].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Gated linear unit over `axis` (size must be even): a * sigmoid(b).
Tensor glu(const Tensor& x, int axis = -1);

// Per-channel 1-D convolution of x [T×C] with kernel [K×C], K odd,
// zero-padded so the output is again [T×C].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel);

// Sum of negative log-probabilities of `targets`, one per row of logp [N×C].
Tensor cross_entropy_from_log_probs(const Tensor& logp,
                                    const std::vector<int64_t>& targets);

// ---- operators --------------------------------------------------------------

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return shift(a, c); }
inline Tensor operator+(double c, const Tensor& a) { return shift(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return shift(a, -c); }
inline Tensor operator-(double c, const Tensor& a) { return shift(neg(a), c); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return scale(a, 1.0 / s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- non-differentiable helpers ----------------------------------------------

int64_t argmax_span(std::span<const double> v);  // first maximum wins
std::vector<int64_t> argmax_rows(const Tensor& m);  // per row of a 2-D tensor

}  // namespace mc
