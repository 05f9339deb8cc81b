#include "core/model.hpp"

#include <cmath>

#include "core/ops.hpp"

namespace mc {

// ---- config ---------------------------------------------------------------

void ModelConfig::validate() const {
  MC_CHECK(architecture == "conformer" || architecture == "transformer",
           "architecture must be conformer or transformer, got '" + architecture + "'");
  MC_CHECK(enc_layers >= 1 && dec_layers >= 1, "layer counts must be positive");
  MC_CHECK(d_att >= 1 && ffn_dim >= 1 && feature_dim >= 1, "dims must be positive");
  MC_CHECK(heads >= 1 && d_att % heads == 0, "attn_dim must divide into heads");
  MC_CHECK(downsample >= 1, "downsample_factor must be >= 1");
  MC_CHECK(conv_kernel >= 1 && conv_kernel % 2 == 1, "conv_kernel must be odd");
  MC_CHECK(length_classes >= 2, "length head needs at least two classes");
  MC_CHECK(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

ModelConfig ModelConfig::from_config(const Config& cfg) {
  // "seed" is read by pipeline front ends rather than here, but belongs to
  // this section.
  cfg.check_section("model.", {"architecture", "enc_layers", "dec_layers",
                               "d_att", "heads", "ffn_dim", "conv_kernel",
                               "downsample", "feature_dim", "length_classes",
                               "dropout", "length_head", "seed"});
  ModelConfig m;
  m.architecture = cfg.get_str("model.architecture", m.architecture);
  m.enc_layers = cfg.get_int("model.enc_layers", m.enc_layers);
  m.dec_layers = cfg.get_int("model.dec_layers", m.dec_layers);
  m.d_att = cfg.get_int("model.d_att", m.d_att);
  m.heads = cfg.get_int("model.heads", m.heads);
  m.ffn_dim = cfg.get_int("model.ffn_dim", m.ffn_dim);
  m.conv_kernel = cfg.get_int("model.conv_kernel", m.conv_kernel);
  m.downsample = cfg.get_int("model.downsample", m.downsample);
  m.feature_dim = cfg.get_int("model.feature_dim", m.feature_dim);
  m.length_classes = cfg.get_int("model.length_classes", m.length_classes);
  m.dropout = cfg.get_double("model.dropout", m.dropout);
  m.length_head = cfg.get_bool("model.length_head", m.length_head);
  m.validate();
  return m;
}

void ModelConfig::write_to(Config& cfg) const {
  cfg.set("model.architecture", architecture);
  cfg.set("model.enc_layers", std::to_string(enc_layers));
  cfg.set("model.dec_layers", std::to_string(dec_layers));
  cfg.set("model.d_att", std::to_string(d_att));
  cfg.set("model.heads", std::to_string(heads));
  cfg.set("model.ffn_dim", std::to_string(ffn_dim));
  cfg.set("model.conv_kernel", std::to_string(conv_kernel));
  cfg.set("model.downsample", std::to_string(downsample));
  cfg.set("model.feature_dim", std::to_string(feature_dim));
  cfg.set("model.length_classes", std::to_string(length_classes));
  cfg.set_double("model.dropout", dropout);
  cfg.set("model.length_head", length_head ? "true" : "false");
}

// ---- parameter store ---------------------------------------------------------

Tensor ParamStore::add(std::string name, Tensor t) {
  for (const auto& item : items_)
    MC_CHECK(item.name != name, "duplicate parameter name: " + name);
  items_.push_back({std::move(name), t});
  return t;
}

Tensor ParamStore::linear_weight(const std::string& name, int64_t in, int64_t out,
                                 Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> vals(static_cast<size_t>(in * out));
  for (auto& v : vals) v = bound * (2.0 * rng.uniform() - 1.0);
  return add(name, Tensor::from_vector({in, out}, std::move(vals), true));
}

Tensor ParamStore::linear_bias(const std::string& name, int64_t in, int64_t out,
                               Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> vals(static_cast<size_t>(out));
  for (auto& v : vals) v = bound * (2.0 * rng.uniform() - 1.0);
  return add(name, Tensor::from_vector({out}, std::move(vals), true));
}

Tensor ParamStore::embedding_table(const std::string& name, int64_t rows,
                                   int64_t dim, Rng& rng) {
  std::vector<double> vals(static_cast<size_t>(rows * dim));
  for (auto& v : vals) v = 0.02 * rng.normal();
  return add(name, Tensor::from_vector({rows, dim}, std::move(vals), true));
}

Tensor ParamStore::ones(const std::string& name, Shape shape) {
  return add(name, Tensor::full(std::move(shape), 1.0, true));
}

Tensor ParamStore::zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

const Tensor& ParamStore::find(const std::string& name) const {
  for (const auto& item : items_)
    if (item.name == name) return item.tensor;
  throw value_error("unknown parameter: " + name);
}

// ---- positional encoding -------------------------------------------------------

Tensor sinusoidal_positions(int64_t n_positions, int64_t dim) {
  MC_CHECK(n_positions >= 1 && dim >= 1, "positions and dim must be positive");
  std::vector<double> vals(static_cast<size_t>(n_positions * dim));
  for (int64_t pos = 0; pos < n_positions; ++pos)
    for (int64_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) /
                                                static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      vals[static_cast<size_t>(pos * dim + i)] =
          (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::from_vector({n_positions, dim}, std::move(vals));
}

// ---- module builders -----------------------------------------------------------

Tensor Model::Linear::operator()(const Tensor& x) const {
  return add(matmul(x, w), b);
}

Tensor Model::LayerNorm::operator()(const Tensor& x) const {
  return layer_norm(x, gain, bias);
}

Model::Linear Model::make_linear(const std::string& name, int64_t in, int64_t out,
                                 Rng& rng) {
  Linear l;
  l.w = params_.linear_weight(name + ".w", in, out, rng);
  l.b = params_.linear_bias(name + ".b", in, out, rng);
  return l;
}

Model::LayerNorm Model::make_layer_norm(const std::string& name, int64_t dim) {
  LayerNorm ln;
  ln.gain = params_.ones(name + ".gain", {dim});
  ln.bias = params_.zeros(name + ".bias", {dim});
  return ln;
}

Model::Attention Model::make_attention(const std::string& name, Rng& rng) {
  Attention a;
  a.heads = cfg_.heads;
  a.q = make_linear(name + ".q", cfg_.d_att, cfg_.d_att, rng);
  a.k = make_linear(name + ".k", cfg_.d_att, cfg_.d_att, rng);
  a.v = make_linear(name + ".v", cfg_.d_att, cfg_.d_att, rng);
  a.out = make_linear(name + ".out", cfg_.d_att, cfg_.d_att, rng);
  return a;
}

Model::Ffn Model::make_ffn(const std::string& name, Rng& rng) {
  Ffn f;
  f.in = make_linear(name + ".in", cfg_.d_att, cfg_.ffn_dim, rng);
  f.out = make_linear(name + ".out", cfg_.ffn_dim, cfg_.d_att, rng);
  return f;
}

Model::Model(ModelConfig cfg, Vocabulary vocab, uint64_t seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), seed_(seed) {
  cfg_.validate();
  MC_CHECK(vocab_.n_real() >= 1, "model needs a non-empty vocabulary");
  Rng rng(Rng::mix(seed_, 0x12D3A7ULL));

  const bool conformer = cfg_.architecture == "conformer";
  stem_ = make_linear("enc.stem", cfg_.feature_dim * cfg_.downsample, cfg_.d_att, rng);
  for (int64_t i = 0; i < cfg_.enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    EncoderBlock b;
    if (conformer) {
      b.ln1 = make_layer_norm(p + ".ln1", cfg_.d_att);
      b.ffn1 = make_ffn(p + ".ffn1", rng);
      b.ln2 = make_layer_norm(p + ".ln2", cfg_.d_att);
      b.attn = make_attention(p + ".attn", rng);
      b.ln3 = make_layer_norm(p + ".ln3", cfg_.d_att);
      b.conv.pw1 = make_linear(p + ".conv.pw1", cfg_.d_att, 2 * cfg_.d_att, rng);
      b.conv.kernel = params_.linear_weight(p + ".conv.dw", cfg_.conv_kernel,
                                            cfg_.d_att, rng);
      b.conv.norm = make_layer_norm(p + ".conv.norm", cfg_.d_att);
      b.conv.pw2 = make_linear(p + ".conv.pw2", cfg_.d_att, cfg_.d_att, rng);
      b.ln4 = make_layer_norm(p + ".ln4", cfg_.d_att);
      b.ffn2 = make_ffn(p + ".ffn2", rng);
      b.ln5 = make_layer_norm(p + ".ln5", cfg_.d_att);
    } else {
      b.ln1 = make_layer_norm(p + ".ln1", cfg_.d_att);
      b.attn = make_attention(p + ".attn", rng);
      b.ln2 = make_layer_norm(p + ".ln2", cfg_.d_att);
      b.ffn1 = make_ffn(p + ".ffn", rng);
    }
    enc_blocks_.push_back(std::move(b));
  }
  if (!conformer) enc_final_ln_ = make_layer_norm("enc.final_ln", cfg_.d_att);

  embed_ = params_.embedding_table("dec.embed", vocab_.size(), cfg_.d_att, rng);
  for (int64_t i = 0; i < cfg_.dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    DecoderBlock b;
    b.ln1 = make_layer_norm(p + ".ln1", cfg_.d_att);
    b.self_attn = make_attention(p + ".self", rng);
    b.ln2 = make_layer_norm(p + ".ln2", cfg_.d_att);
    b.cross_attn = make_attention(p + ".cross", rng);
    b.ln3 = make_layer_norm(p + ".ln3", cfg_.d_att);
    b.ffn = make_ffn(p + ".ffn", rng);
    dec_blocks_.push_back(std::move(b));
  }
  dec_final_ln_ = make_layer_norm("dec.final_ln", cfg_.d_att);

  ctc_head_ = make_linear("head.ctc", cfg_.d_att, vocab_.n_real() + 1, rng);
  token_head_ = make_linear("head.token", cfg_.d_att, vocab_.n_real(), rng);
  if (cfg_.length_head)
    length_head_ = make_linear("head.length", cfg_.d_att, cfg_.length_classes, rng);
}

// ---- forward pieces --------------------------------------------------------------

Tensor Model::drop(const Tensor& x, bool training, Rng* rng) const {
  if (!training || cfg_.dropout == 0.0) return x;
  MC_CHECK(rng != nullptr, "training-mode forward needs an rng for dropout");
  return dropout(x, cfg_.dropout, *rng, true);
}

Tensor Model::attend(const Attention& a, const Tensor& query_src,
                     const Tensor& kv_src, bool training, Rng* rng) const {
  const int64_t dh = cfg_.d_att / a.heads;
  Tensor q = a.q(query_src), k = a.k(kv_src), v = a.v(kv_src);
  std::vector<Tensor> contexts;
  contexts.reserve(static_cast<size_t>(a.heads));
  for (int64_t h = 0; h < a.heads; ++h) {
    Tensor qh = slice(q, 1, h * dh, (h + 1) * dh);
    Tensor kh = slice(k, 1, h * dh, (h + 1) * dh);
    Tensor vh = slice(v, 1, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor weights = drop(softmax(scores, -1), training, rng);
    contexts.push_back(matmul(weights, vh));
  }
  return a.out(concat(contexts, 1));
}

Tensor Model::run_ffn(const Ffn& f, const Tensor& x, bool training, Rng* rng) const {
  return f.out(drop(swish(f.in(x)), training, rng));
}

Tensor Model::run_conv(const ConvModule& c, const Tensor& x) const {
  Tensor y = glu(c.pw1(x), -1);
  y = depthwise_conv1d(y, c.kernel);
  y = swish(c.norm(y));
  return c.pw2(y);
}

Tensor Model::encode(const Tensor& features, bool training, Rng* rng) const {
  MC_CHECK_SHAPE(features.ndim() == 2 && features.size(1) == cfg_.feature_dim,
                 "features must be [T x " + std::to_string(cfg_.feature_dim) + "]");
  const int64_t t = features.size(0);
  MC_CHECK(t >= cfg_.downsample, "input too short: " + std::to_string(t) +
                                     " frames < downsample factor " +
                                     std::to_string(cfg_.downsample));

  // Stack each group of `downsample` consecutive frames into one row (zero
  // padding the tail), then project. T' = ceil(T / downsample).
  const int64_t t_out = (t + cfg_.downsample - 1) / cfg_.downsample;
  Tensor x = features;
  const int64_t pad_rows = t_out * cfg_.downsample - t;
  if (pad_rows > 0)
    x = concat({x, Tensor::zeros({pad_rows, cfg_.feature_dim})}, 0);
  x = stem_(reshape(x, {t_out, cfg_.downsample * cfg_.feature_dim}));

  x = drop(add(x, sinusoidal_positions(t_out, cfg_.d_att)), training, rng);

  const bool conformer = cfg_.architecture == "conformer";
  for (const auto& b : enc_blocks_) {
    if (conformer) {
      x = add(x, scale(drop(run_ffn(b.ffn1, b.ln1(x), training, rng), training, rng), 0.5));
      Tensor n2 = b.ln2(x);
      x = add(x, drop(attend(b.attn, n2, n2, training, rng), training, rng));
      x = add(x, drop(run_conv(b.conv, b.ln3(x)), training, rng));
      x = add(x, scale(drop(run_ffn(b.ffn2, b.ln4(x), training, rng), training, rng), 0.5));
      x = b.ln5(x);
    } else {
      Tensor n1 = b.ln1(x);
      x = add(x, drop(attend(b.attn, n1, n1, training, rng), training, rng));
      x = add(x, drop(run_ffn(b.ffn1, b.ln2(x), training, rng), training, rng));
    }
  }
  if (!conformer) x = enc_final_ln_(x);
  return x;
}

Tensor Model::ctc_log_posteriors(const Tensor& enc) const {
  MC_CHECK_SHAPE(enc.ndim() == 2 && enc.size(1) == cfg_.d_att,
                 "encoder states must be [T' x d_att]");
  return log_softmax(ctc_head_(enc), 1);
}

Model::DecoderOut Model::decode_mlm(const Tensor& enc,
                                    const std::vector<int64_t>& tokens,
                                    bool training, Rng* rng) const {
  MC_CHECK(!tokens.empty(), "decoder input must be non-empty");
  MC_CHECK_SHAPE(enc.ndim() == 2 && enc.size(1) == cfg_.d_att,
                 "encoder states must be [T' x d_att]");
  for (int64_t tok : tokens)
    MC_CHECK(tok >= 0 && tok < vocab_.size() && tok != vocab_.blank_id(),
             "decoder input id " + std::to_string(tok) + " invalid");

  const int64_t l = static_cast<int64_t>(tokens.size());
  Tensor x = scale(embedding(embed_, tokens), std::sqrt(static_cast<double>(cfg_.d_att)));
  x = drop(add(x, sinusoidal_positions(l, cfg_.d_att)), training, rng);

  // Bidirectional self-attention: no causal mask anywhere.
  for (const auto& b : dec_blocks_) {
    Tensor n1 = b.ln1(x);
    x = add(x, drop(attend(b.self_attn, n1, n1, training, rng), training, rng));
    x = add(x, drop(attend(b.cross_attn, b.ln2(x), enc, training, rng), training, rng));
    x = add(x, drop(run_ffn(b.ffn, b.ln3(x), training, rng), training, rng));
  }
  DecoderOut out;
  out.states = dec_final_ln_(x);
  out.token_log_probs = log_softmax(token_head_(out.states), 1);
  if (cfg_.length_head)
    out.length_log_probs = log_softmax(length_head_(out.states), 1);
  return out;
}

}  // namespace mc
