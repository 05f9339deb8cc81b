#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/vocab.hpp"

namespace mc {

struct ModelConfig {
  std::string architecture = "conformer";  // conformer | transformer
  int64_t enc_layers = 2;
  int64_t dec_layers = 2;
  int64_t d_att = 64;
  int64_t heads = 4;
  int64_t ffn_dim = 128;
  int64_t conv_kernel = 7;  // conformer only, odd
  int64_t downsample = 2;
  int64_t feature_dim = 8;
  int64_t length_classes = 51;  // classes 0..50
  double dropout = 0.1;
  bool length_head = true;

  void validate() const;
  // Reads the model.* keys of a flat config, falling back to these defaults.
  static ModelConfig from_config(const Config& cfg);
  void write_to(Config& cfg) const;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Owns every trainable tensor, in creation order, so optimizers and
// checkpoints see a stable, deterministic naming.
class ParamStore {
 public:
  Tensor linear_weight(const std::string& name, int64_t in, int64_t out, Rng& rng);
  Tensor linear_bias(const std::string& name, int64_t in, int64_t out, Rng& rng);
  Tensor embedding_table(const std::string& name, int64_t rows, int64_t dim, Rng& rng);
  Tensor ones(const std::string& name, Shape shape);
  Tensor zeros(const std::string& name, Shape shape);

  std::vector<NamedParam>& items() { return items_; }
  const std::vector<NamedParam>& items() const { return items_; }
  const Tensor& find(const std::string& name) const;

 private:
  Tensor add(std::string name, Tensor t);
  std::vector<NamedParam> items_;
};

// Absolute sinusoidal positional encodings, [n_positions x dim], constant.
Tensor sinusoidal_positions(int64_t n_positions, int64_t dim);

// Encoder-decoder network: (Conformer or Transformer) encoder over frame
// features, bidirectional MLM decoder over token sequences with
// cross-attention, plus CTC, token, and length projection heads.
class Model {
 public:
  Model(ModelConfig cfg, Vocabulary vocab, uint64_t seed);

  // [T x feature_dim] -> [ceil(T/downsample) x d_att]. Dropout is active only
  // when training; rng must be non-null in that case.
  Tensor encode(const Tensor& features, bool training = false,
                Rng* rng = nullptr) const;

  // [T' x d_att] -> [T' x (n_real+1)] log-posteriors, blank in the last column.
  Tensor ctc_log_posteriors(const Tensor& enc) const;

  struct DecoderOut {
    Tensor states;            // [L x d_att] final decoder states
    Tensor token_log_probs;   // [L x n_real]
    Tensor length_log_probs;  // [L x length_classes]; undefined without the head
  };

  // Bidirectional decode over a (possibly masked) token sequence. Tokens may
  // be any non-blank vocabulary id; the sequence must be non-empty.
  DecoderOut decode_mlm(const Tensor& enc, const std::vector<int64_t>& tokens,
                        bool training = false, Rng* rng = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  uint64_t seed() const { return seed_; }
  std::vector<NamedParam>& parameters() { return params_.items(); }
  const std::vector<NamedParam>& parameters() const { return params_.items(); }

 private:
  struct Linear {
    Tensor w, b;
    Tensor operator()(const Tensor& x) const;
  };
  struct LayerNorm {
    Tensor gain, bias;
    Tensor operator()(const Tensor& x) const;
  };
  struct Attention {
    Linear q, k, v, out;
    int64_t heads = 1;
  };
  struct Ffn {
    Linear in, out;
  };
  struct ConvModule {
    Linear pw1;      // d -> 2d, halved back by GLU
    Tensor kernel;   // [conv_kernel x d] depthwise
    LayerNorm norm;  // stands in for batch norm at batch size 1
    Linear pw2;      // d -> d
  };
  struct EncoderBlock {
    // transformer: ln1+attn, ln2+ffn1. conformer adds ffn2, conv, ln3..ln5.
    LayerNorm ln1, ln2, ln3, ln4, ln5;
    Ffn ffn1, ffn2;
    Attention attn;
    ConvModule conv;
  };
  struct DecoderBlock {
    LayerNorm ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    Ffn ffn;
  };

  Linear make_linear(const std::string& name, int64_t in, int64_t out, Rng& rng);
  LayerNorm make_layer_norm(const std::string& name, int64_t dim);
  Attention make_attention(const std::string& name, Rng& rng);
  Ffn make_ffn(const std::string& name, Rng& rng);

  Tensor attend(const Attention& a, const Tensor& query_src, const Tensor& kv_src,
                bool training, Rng* rng) const;
  Tensor run_ffn(const Ffn& f, const Tensor& x, bool training, Rng* rng) const;
  Tensor run_conv(const ConvModule& c, const Tensor& x) const;
  Tensor drop(const Tensor& x, bool training, Rng* rng) const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  uint64_t seed_ = 0;
  ParamStore params_;

  Linear stem_;  // stacked-frame downsampling projection
  std::vector<EncoderBlock> enc_blocks_;
  LayerNorm enc_final_ln_;  // transformer only (conformer blocks end in LN)
  Tensor embed_;            // [n_real + specials x d_att]
  std::vector<DecoderBlock> dec_blocks_;
  LayerNorm dec_final_ln_;
  Linear ctc_head_, token_head_, length_head_;
};

}  // namespace mc
