#include "core/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace mc::decoding {
namespace {

// Row-major accessor over a [rows x cols] log-prob tensor.
struct Rows {
  explicit Rows(const Tensor& t)
      : data(t.data()), cols(t.size(1)) {}

  double at(int64_t r, int64_t c) const {
    return data[static_cast<size_t>(r * cols + c)];
  }
  // (argmax column, probability) for one row; first maximum wins ties.
  std::pair<int64_t, double> best(int64_t r) const {
    int64_t arg = 0;
    double top = at(r, 0);
    for (int64_t c = 1; c < cols; ++c)
      if (at(r, c) > top) {
        top = at(r, c);
        arg = c;
      }
    return {arg, std::exp(top)};
  }

  std::span<const double> data;
  int64_t cols;
};

// Positions masked in `seq`, ascending.
std::vector<int64_t> mask_positions_of(const std::vector<int64_t>& seq,
                                       int64_t mask_id) {
  std::vector<int64_t> out;
  for (size_t i = 0; i < seq.size(); ++i)
    if (seq[i] == mask_id) out.push_back(static_cast<int64_t>(i));
  return out;
}

// Picks the n highest-probability candidates; ties resolve to the leftmost
// position so decoding stays deterministic.
std::vector<size_t> top_n(const std::vector<double>& probs, int64_t n) {
  std::vector<size_t> order(probs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });
  order.resize(static_cast<size_t>(std::min<int64_t>(n, static_cast<int64_t>(order.size()))));
  return order;
}

void check_clean(const std::vector<int64_t>& tokens, const Vocabulary& vocab) {
  for (int64_t tok : tokens)
    MC_CHECK(vocab.is_real(tok),
             "decode produced a non-real token id: " + std::to_string(tok));
}

int64_t fill_quota(int64_t n_mask, int64_t k) {
  return std::max<int64_t>(1, n_mask / k);
}

// Shared engine for mask_predict and restricted_mp: fill every mask each
// pass, then re-mask the lowest-confidence positions under a shrinking
// budget. `budget_cap < 0` means uncapped.
DecodeResult run_mask_predict(const Model& model, const Tensor& enc,
                              std::vector<int64_t> seq, int64_t budget_cap,
                              const DecodeConfig& cfg) {
  const int64_t mask_id = model.vocab().mask_id();
  const auto len = static_cast<int64_t>(seq.size());
  DecodeResult res;
  res.trace.initial_mask_count =
      static_cast<int64_t>(mask_positions_of(seq, mask_id).size());

  std::vector<double> score(seq.size(), 0.0);
  for (int64_t k = 1; k <= cfg.K; ++k) {
    auto masked = mask_positions_of(seq, mask_id);
    if (masked.empty()) break;

    auto out = model.decode_mlm(enc, seq);
    ++res.trace.decoder_forward_count;
    Rows token_lp(out.token_log_probs);

    DecodeTrace::Iteration it;
    it.masked_positions = masked;
    for (int64_t pos : masked) {
      auto [tok, prob] = token_lp.best(pos);
      seq[static_cast<size_t>(pos)] = tok;
      score[static_cast<size_t>(pos)] = prob;
      it.filled.push_back({pos, tok, prob});
    }
    // Confidence of already-decided tokens refreshes from the same pass.
    for (int64_t pos = 0; pos < len; ++pos)
      if (!std::binary_search(masked.begin(), masked.end(), pos))
        score[static_cast<size_t>(pos)] =
            std::exp(token_lp.at(pos, seq[static_cast<size_t>(pos)]));
    res.trace.iterations.push_back(std::move(it));

    int64_t budget = len * (cfg.K - k) / cfg.K;
    if (budget_cap >= 0) budget = std::min(budget, budget_cap);
    if (budget <= 0) break;
    std::vector<double> neg(score);
    for (auto& s : neg) s = -s;  // lowest confidence = highest negated
    for (size_t idx : top_n(neg, budget)) seq[idx] = mask_id;
  }

  res.tokens = std::move(seq);
  check_clean(res.tokens, model.vocab());
  return res;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
  if (name == "ctc_greedy") return Strategy::ctc_greedy;
  if (name == "maskctc") return Strategy::maskctc;
  if (name == "shrink_expand") return Strategy::shrink_expand;
  if (name == "mask_predict") return Strategy::mask_predict;
  if (name == "restricted_mp") return Strategy::restricted_mp;
  throw value_error("unknown decode strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ctc_greedy: return "ctc_greedy";
    case Strategy::maskctc: return "maskctc";
    case Strategy::shrink_expand: return "shrink_expand";
    case Strategy::mask_predict: return "mask_predict";
    case Strategy::restricted_mp: return "restricted_mp";
  }
  throw value_error("invalid strategy enum");
}

void DecodeConfig::validate() const {
  MC_CHECK(K >= 1, "decode iterations K must be >= 1");
  MC_CHECK(p_thres >= 0.0 && p_thres <= 1.0, "p_thres must lie in [0, 1]");
  MC_CHECK(max_loop >= 0, "max_loop must be non-negative");
  MC_CHECK(target_len >= 0, "target_len must be non-negative");
}

DecodeConfig DecodeConfig::for_strategy(Strategy s) {
  DecodeConfig cfg;
  cfg.strategy = s;
  if (s == Strategy::shrink_expand) cfg.p_thres = 0.5;
  return cfg;
}

DecodeConfig DecodeConfig::from_config(const Config& cfg) {
  cfg.check_section("decode.", {"strategy", "k", "p_thres", "max_loop",
                                "target_len", "recompute_c"});
  DecodeConfig d = for_strategy(
      strategy_from_string(cfg.get_str("decode.strategy", "maskctc")));
  d.K = cfg.get_int("decode.k", d.K);
  d.p_thres = cfg.get_double("decode.p_thres", d.p_thres);
  d.max_loop = cfg.get_int("decode.max_loop", d.max_loop);
  d.target_len = cfg.get_int("decode.target_len", d.target_len);
  d.recompute_c = cfg.get_bool("decode.recompute_c", d.recompute_c);
  d.validate();
  return d;
}

void DecodeConfig::write_to(Config& cfg) const {
  cfg.set("decode.strategy", strategy_name(strategy));
  cfg.set("decode.k", std::to_string(K));
  cfg.set_double("decode.p_thres", p_thres);
  cfg.set("decode.max_loop", std::to_string(max_loop));
  cfg.set("decode.target_len", std::to_string(target_len));
  cfg.set("decode.recompute_c", recompute_c ? "true" : "false");
}

std::vector<int64_t> shrink_masks(const std::vector<int64_t>& seq, int64_t mask_id) {
  std::vector<int64_t> out;
  out.reserve(seq.size());
  for (int64_t tok : seq) {
    if (tok == mask_id && !out.empty() && out.back() == mask_id) continue;
    out.push_back(tok);
  }
  return out;
}

std::vector<int64_t> expand_masks(const std::vector<int64_t>& seq,
                                  const std::vector<int64_t>& lengths,
                                  int64_t mask_id, int64_t max_len) {
  int64_t n_masks = 0, n_obs = 0;
  for (int64_t tok : seq) (tok == mask_id ? n_masks : n_obs) += 1;
  MC_CHECK(static_cast<int64_t>(lengths.size()) == n_masks,
           "expand needs one length per mask: got " +
               std::to_string(lengths.size()) + " for " + std::to_string(n_masks));
  for (int64_t d : lengths) MC_CHECK(d >= 0, "mask lengths must be non-negative");
  MC_CHECK(max_len >= n_obs, "expansion cap cannot drop observed tokens");

  std::vector<int64_t> out;
  size_t next_len = 0;
  int64_t obs_rest = n_obs;
  for (int64_t tok : seq) {
    if (tok != mask_id) {
      out.push_back(tok);
      --obs_rest;
      continue;
    }
    const int64_t allowed =
        max_len - static_cast<int64_t>(out.size()) - obs_rest;
    const int64_t d = std::min(lengths[next_len++], std::max<int64_t>(0, allowed));
    out.insert(out.end(), static_cast<size_t>(d), mask_id);
  }
  return out;
}

DecodeResult decode_maskctc(const Model& model, const Tensor& enc,
                            const ctc::GreedyResult& ctc_out,
                            const DecodeConfig& cfg) {
  cfg.validate();
  NoGradGuard inference;
  const int64_t mask_id = model.vocab().mask_id();

  DecodeResult res;
  res.trace.strategy = strategy_name(Strategy::maskctc);
  std::vector<int64_t> seq = ctc_out.tokens;
  for (size_t i = 0; i < seq.size(); ++i)
    if (ctc_out.confidences[i] < cfg.p_thres) seq[i] = mask_id;

  auto masked = mask_positions_of(seq, mask_id);
  const auto n_mask = static_cast<int64_t>(masked.size());
  res.trace.initial_mask_count = n_mask;
  if (n_mask == 0) {
    res.tokens = std::move(seq);
    return res;  // CTC output stands; zero decoder calls
  }

  int64_t c = fill_quota(n_mask, cfg.K);
  while (!masked.empty()) {
    auto out = model.decode_mlm(enc, seq);
    ++res.trace.decoder_forward_count;
    Rows token_lp(out.token_log_probs);

    if (cfg.recompute_c)
      c = fill_quota(static_cast<int64_t>(masked.size()), cfg.K);
    const bool last = res.trace.decoder_forward_count == cfg.K ||
                      static_cast<int64_t>(masked.size()) <= c;
    const int64_t n_fill = last ? static_cast<int64_t>(masked.size()) : c;

    std::vector<double> probs;
    std::vector<int64_t> tokens;
    for (int64_t pos : masked) {
      auto [tok, prob] = token_lp.best(pos);
      probs.push_back(prob);
      tokens.push_back(tok);
    }

    DecodeTrace::Iteration it;
    it.masked_positions = masked;
    for (size_t idx : top_n(probs, n_fill)) {
      const int64_t pos = masked[idx];
      seq[static_cast<size_t>(pos)] = tokens[idx];
      it.filled.push_back({pos, tokens[idx], probs[idx]});
    }
    res.trace.iterations.push_back(std::move(it));
    masked = mask_positions_of(seq, mask_id);
  }

  res.tokens = std::move(seq);
  check_clean(res.tokens, model.vocab());
  return res;
}

DecodeResult decode_shrink_expand(const Model& model, const Tensor& enc,
                                  const ctc::GreedyResult& ctc_out,
                                  const DecodeConfig& cfg) {
  cfg.validate();
  MC_CHECK(model.config().length_head,
           "shrink_expand needs a model trained with the length head");
  NoGradGuard inference;
  const int64_t mask_id = model.vocab().mask_id();
  const int64_t max_loop = cfg.max_loop > 0 ? cfg.max_loop : 2 * cfg.K;

  DecodeResult res;
  res.trace.strategy = strategy_name(Strategy::shrink_expand);
  std::vector<int64_t> seq = ctc_out.tokens;
  if (seq.empty()) return res;

  // Masking consults the decoder, not CTC: score each CTC token by the
  // MLM probability of itself given the full CTC output.
  {
    auto out = model.decode_mlm(enc, seq);
    ++res.trace.decoder_forward_count;
    Rows token_lp(out.token_log_probs);
    for (size_t i = 0; i < seq.size(); ++i)
      if (std::exp(token_lp.at(static_cast<int64_t>(i), seq[i])) < cfg.p_thres)
        seq[i] = mask_id;
  }

  auto masked = mask_positions_of(seq, mask_id);
  res.trace.initial_mask_count = static_cast<int64_t>(masked.size());
  int64_t c = fill_quota(res.trace.initial_mask_count, cfg.K);

  Tensor last_token_lp;
  bool has_token_lp = false;
  for (int64_t loop = 0; loop < max_loop && !masked.empty(); ++loop) {
    DecodeTrace::Iteration it;

    seq = shrink_masks(seq, mask_id);
    masked = mask_positions_of(seq, mask_id);
    it.masked_positions = masked;

    // Forward 1: length of every (merged) mask.
    auto len_out = model.decode_mlm(enc, seq);
    ++res.trace.decoder_forward_count;
    Rows length_lp(len_out.length_log_probs);
    std::vector<int64_t> lengths;
    for (int64_t pos : masked) lengths.push_back(length_lp.best(pos).first);
    it.length_predictions = lengths;

    seq = expand_masks(seq, lengths, mask_id,
                       2 * std::max<int64_t>(1, static_cast<int64_t>(seq.size())));
    masked = mask_positions_of(seq, mask_id);
    if (masked.empty()) {  // every mask was deleted; nothing left to predict
      res.trace.iterations.push_back(std::move(it));
      break;
    }

    // Forward 2: fill the C most confident masks.
    auto tok_out = model.decode_mlm(enc, seq);
    ++res.trace.decoder_forward_count;
    last_token_lp = tok_out.token_log_probs;
    has_token_lp = true;
    Rows token_lp(last_token_lp);

    if (cfg.recompute_c)
      c = fill_quota(static_cast<int64_t>(masked.size()), cfg.K);
    std::vector<double> probs;
    std::vector<int64_t> tokens;
    for (int64_t pos : masked) {
      auto [tok, prob] = token_lp.best(pos);
      probs.push_back(prob);
      tokens.push_back(tok);
    }
    for (size_t idx : top_n(probs, c)) {
      const int64_t pos = masked[idx];
      seq[static_cast<size_t>(pos)] = tokens[idx];
      it.filled.push_back({pos, tokens[idx], probs[idx]});
    }
    res.trace.iterations.push_back(std::move(it));
    masked = mask_positions_of(seq, mask_id);
  }

  if (!masked.empty()) {
    // Loop budget exhausted: resolve the leftovers from the probabilities of
    // the most recent token pass rather than spending another forward.
    MC_CHECK(has_token_lp, "internal: force-fill without a token pass");
    res.trace.force_filled = true;
    Rows token_lp(last_token_lp);
    DecodeTrace::Iteration it;
    it.masked_positions = masked;
    for (int64_t pos : masked) {
      auto [tok, prob] = token_lp.best(pos);
      seq[static_cast<size_t>(pos)] = tok;
      it.filled.push_back({pos, tok, prob});
    }
    res.trace.iterations.push_back(std::move(it));
  }

  res.tokens = std::move(seq);
  check_clean(res.tokens, model.vocab());
  return res;
}

DecodeResult decode_mask_predict(const Model& model, const Tensor& enc,
                                 int64_t target_len, const DecodeConfig& cfg) {
  cfg.validate();
  NoGradGuard inference;
  DecodeResult res;
  res.trace.strategy = strategy_name(Strategy::mask_predict);
  if (target_len == 0) return res;
  MC_CHECK(target_len >= 1, "mask_predict needs a positive target length");

  std::vector<int64_t> seq(static_cast<size_t>(target_len),
                           model.vocab().mask_id());
  auto out = run_mask_predict(model, enc, std::move(seq), -1, cfg);
  out.trace.strategy = res.trace.strategy;
  return out;
}

DecodeResult decode_restricted_mp(const Model& model, const Tensor& enc,
                                  const ctc::GreedyResult& ctc_out,
                                  const DecodeConfig& cfg) {
  cfg.validate();
  NoGradGuard inference;
  const int64_t mask_id = model.vocab().mask_id();

  DecodeResult res;
  res.trace.strategy = strategy_name(Strategy::restricted_mp);
  std::vector<int64_t> seq = ctc_out.tokens;
  for (size_t i = 0; i < seq.size(); ++i)
    if (ctc_out.confidences[i] < cfg.p_thres) seq[i] = mask_id;

  const auto n_init =
      static_cast<int64_t>(mask_positions_of(seq, mask_id).size());
  if (n_init == 0) {
    res.tokens = std::move(seq);
    return res;  // keep the CTC output untouched
  }
  auto out = run_mask_predict(model, enc, std::move(seq), n_init, cfg);
  out.trace.strategy = res.trace.strategy;
  return out;
}

DecodeResult decode(const Model& model, const Tensor& features,
                    const DecodeConfig& cfg) {
  cfg.validate();
  NoGradGuard inference;
  Tensor enc = model.encode(features);
  auto greedy =
      ctc::greedy_decode(model.ctc_log_posteriors(enc), model.vocab().blank_id());

  DecodeResult res;
  switch (cfg.strategy) {
    case Strategy::ctc_greedy:
      res.tokens = greedy.tokens;
      res.trace.strategy = strategy_name(cfg.strategy);
      break;
    case Strategy::maskctc:
      res = decode_maskctc(model, enc, greedy, cfg);
      break;
    case Strategy::shrink_expand:
      res = decode_shrink_expand(model, enc, greedy, cfg);
      break;
    case Strategy::mask_predict: {
      const int64_t len = cfg.target_len > 0
                              ? cfg.target_len
                              : static_cast<int64_t>(greedy.tokens.size());
      res = decode_mask_predict(model, enc, len, cfg);
      break;
    }
    case Strategy::restricted_mp:
      res = decode_restricted_mp(model, enc, greedy, cfg);
      break;
  }
  res.trace.encoder_forward_count = 1;
  return res;
}

std::string trace_to_json_line(const std::string& utt_id, const DecodeTrace& trace) {
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& it : trace.iterations) {
    nlohmann::json filled = nlohmann::json::array();
    for (const auto& f : it.filled)
      filled.push_back({{"pos", f.position}, {"token", f.token}, {"prob", f.prob}});
    iterations.push_back({{"masked", it.masked_positions},
                          {"lengths", it.length_predictions},
                          {"filled", filled}});
  }
  nlohmann::json j{{"id", utt_id},
                   {"strategy", trace.strategy},
                   {"decoder_forwards", trace.decoder_forward_count},
                   {"encoder_forwards", trace.encoder_forward_count},
                   {"initial_masks", trace.initial_mask_count},
                   {"force_filled", trace.force_filled},
                   {"iterations", iterations}};
  return j.dump();
}

}  // namespace mc::decoding
