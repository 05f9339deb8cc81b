#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>

#include "core/ctc.hpp"
#include "core/masking.hpp"
#include "core/ops.hpp"

namespace mc::train {
namespace {

constexpr uint64_t kShuffleTag = 0x5348;
constexpr uint64_t kUttTag = 0x55AA;

std::string epoch_path(const std::string& dir, int64_t epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch-%03lld.mckp",
                static_cast<long long>(epoch));
  return dir + "/" + name;
}

// In-house Fisher-Yates: std::shuffle's draw sequence is
// implementation-defined, which would break cross-platform determinism.
void shuffle_order(std::vector<int64_t>& order, Rng& rng) {
  for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(rng.uniform_int(0, i))]);
}

}  // namespace

void TrainConfig::validate() const {
  MC_CHECK(epochs >= 1, "epochs must be >= 1");
  MC_CHECK(lr > 0.0, "learning rate must be positive");
  MC_CHECK(warmup_steps >= 1, "warmup_steps must be >= 1");
  MC_CHECK(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  MC_CHECK(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  MC_CHECK(adam_eps > 0.0, "adam_eps must be positive");
  MC_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  MC_CHECK(beta > 0.0, "beta must be positive");
  MC_CHECK(grad_clip >= 0.0, "grad_clip must be non-negative");
  MC_CHECK(!out_dir.empty(), "out_dir must be set");
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
  cfg.check_section("train.", {"epochs", "lr", "warmup_steps", "adam_beta1",
                               "adam_beta2", "adam_eps", "alpha", "beta",
                               "grad_clip", "seed", "out_dir"});
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.lr = cfg.get_double("train.lr", t.lr);
  t.warmup_steps = cfg.get_int("train.warmup_steps", t.warmup_steps);
  t.adam_beta1 = cfg.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = cfg.get_double("train.adam_beta2", t.adam_beta2);
  t.adam_eps = cfg.get_double("train.adam_eps", t.adam_eps);
  t.alpha = cfg.get_double("train.alpha", t.alpha);
  t.beta = cfg.get_double("train.beta", t.beta);
  t.grad_clip = cfg.get_double("train.grad_clip", t.grad_clip);
  t.seed = cfg.get_u64("train.seed", t.seed);
  t.out_dir = cfg.get_str("train.out_dir", t.out_dir);
  t.validate();
  return t;
}

void TrainConfig::write_to(Config& cfg) const {
  cfg.set("train.epochs", std::to_string(epochs));
  cfg.set_double("train.lr", lr);
  cfg.set("train.warmup_steps", std::to_string(warmup_steps));
  cfg.set_double("train.adam_beta1", adam_beta1);
  cfg.set_double("train.adam_beta2", adam_beta2);
  cfg.set_double("train.adam_eps", adam_eps);
  cfg.set_double("train.alpha", alpha);
  cfg.set_double("train.beta", beta);
  cfg.set_double("train.grad_clip", grad_clip);
  cfg.set("train.seed", std::to_string(seed));
  cfg.set("train.out_dir", out_dir);
}

double learning_rate(const TrainConfig& cfg, int64_t step) {
  MC_CHECK(step >= 1, "learning-rate step is 1-based");
  const double w = static_cast<double>(cfg.warmup_steps);
  const double s = static_cast<double>(step);
  if (s <= w) return cfg.lr * s / w;
  return cfg.lr * std::sqrt(w / s);
}

double clip_gradients(std::vector<NamedParam>& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (auto& g : p.tensor.impl()->grad) g *= scale;
    }
  }
  return norm;
}

Adam::Adam(Model& model, const TrainConfig& cfg)
    : b1_(cfg.adam_beta1), b2_(cfg.adam_beta2), eps_(cfg.adam_eps) {
  for (auto& p : model.parameters()) {
    Slot s;
    s.name = p.name;
    s.param = p.tensor;
    s.m.assign(static_cast<size_t>(p.tensor.numel()), 0.0);
    s.v.assign(static_cast<size_t>(p.tensor.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& s : slots_) {
    if (!s.param.has_grad()) continue;
    auto grad = s.param.grad();
    auto vals = s.param.mutable_data();
    for (size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      s.m[i] = b1_ * s.m[i] + (1.0 - b1_) * g;
      s.v[i] = b2_ * s.v[i] + (1.0 - b2_) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      vals[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

void Adam::append_state(Checkpoint& ckpt) const {
  for (const auto& s : slots_) {
    ckpt.blobs.push_back({"opt.m." + s.name, s.m});
    ckpt.blobs.push_back({"opt.v." + s.name, s.v});
  }
  ckpt.blobs.push_back({"opt.step", {static_cast<double>(t_)}});
}

bool Adam::has_state(const Checkpoint& ckpt) {
  return ckpt.find("opt.step") != nullptr;
}

void Adam::load_state(const Checkpoint& ckpt) {
  const auto* step_blob = ckpt.find("opt.step");
  if (step_blob == nullptr || step_blob->values.size() != 1)
    throw data_error("checkpoint carries no optimizer state");
  t_ = static_cast<int64_t>(step_blob->values[0]);
  for (auto& s : slots_) {
    const auto* m = ckpt.find("opt.m." + s.name);
    const auto* v = ckpt.find("opt.v." + s.name);
    if (m == nullptr || v == nullptr || m->values.size() != s.m.size() ||
        v->values.size() != s.v.size())
      throw data_error("optimizer state mismatch for parameter: " + s.name);
    s.m = m->values;
    s.v = v->values;
  }
}

TrainResult train(Model& model, const std::vector<Utterance>& corpus,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  MC_CHECK(!corpus.empty(), "training corpus is empty");
  const Vocabulary& vocab = model.vocab();
  for (const auto& utt : corpus) {
    MC_CHECK(!utt.reference.empty(), "utterance " + utt.id + " has no reference");
    for (int64_t tok : utt.reference)
      MC_CHECK(vocab.is_real(tok), "utterance " + utt.id +
                                       " references token id " +
                                       std::to_string(tok) +
                                       " outside the model vocabulary");
    MC_CHECK_SHAPE(utt.features.ndim() == 2 &&
                       utt.features.size(1) == model.config().feature_dim,
                   "utterance " + utt.id + " feature dim mismatch");
  }
  std::filesystem::create_directories(cfg.out_dir);

  Adam opt(model, cfg);

  // Resume: adopt the newest epoch checkpoint at or below the target.
  int64_t start_epoch = 1;
  for (int64_t e = cfg.epochs; e >= 1; --e) {
    const auto path = epoch_path(cfg.out_dir, e);
    if (!std::filesystem::exists(path)) continue;
    auto ckpt = load_checkpoint(path);
    load_parameters(ckpt, model);
    opt.load_state(ckpt);
    start_epoch = e + 1;
    if (log)
      *log << "resuming after " << path << " (epoch " << e << ", step "
           << opt.steps_taken() << ")\n";
    break;
  }

  const int64_t mask_id = vocab.mask_id();
  const int64_t blank_id = vocab.blank_id();
  const int64_t max_len_class = model.config().length_classes - 1;
  const bool with_dlp = model.config().length_head;

  TrainResult result;
  for (int64_t epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    std::vector<int64_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::mix({cfg.seed, static_cast<uint64_t>(epoch), kShuffleTag}));
    shuffle_order(order, shuffle_rng);

    EpochStats stats;
    stats.epoch = epoch;
    for (int64_t idx : order) {
      const Utterance& utt = corpus[static_cast<size_t>(idx)];
      const auto& y = utt.reference;
      const int64_t frames_out =
          (utt.features.size(0) + model.config().downsample - 1) /
          model.config().downsample;
      if (!ctc::feasible(frames_out, y)) {
        ++stats.n_skipped;
        continue;
      }

      // All randomness for this utterance hangs off (seed, epoch, index), so
      // a resumed run replays the identical draws.
      Rng rng(Rng::mix({cfg.seed, static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(idx), kUttTag}));
      opt.zero_grad();

      Tensor enc = model.encode(utt.features, true, &rng);
      Tensor ctc_nll = ctc::ctc_loss(model.ctc_log_posteriors(enc), y, blank_id);

      auto mlm_sample = masking::sample_mlm_mask(y, rng, mask_id);
      auto mlm_out = model.decode_mlm(enc, mlm_sample.tokens, true, &rng);
      Tensor mlm_nll = masking::mlm_loss(mlm_out.token_log_probs, mlm_sample, y);

      Tensor dlp_nll = Tensor::scalar(0.0);
      if (with_dlp) {
        auto del = masking::make_deletion_sample(y, rng, mask_id, max_len_class);
        auto del_out = model.decode_mlm(enc, del.masked.tokens, true, &rng);
        auto ins = masking::make_insertion_sample(y, rng, mask_id);
        auto ins_out = model.decode_mlm(enc, ins.masked.tokens, true, &rng);
        dlp_nll = add(masking::dlp_loss(del_out.length_log_probs, del),
                      masking::dlp_loss(ins_out.length_log_probs, ins));
      }

      Tensor loss =
          masking::combined_loss(ctc_nll, mlm_nll, dlp_nll, cfg.alpha, cfg.beta);
      loss.backward();
      clip_gradients(model.parameters(), cfg.grad_clip);
      opt.step(learning_rate(cfg, opt.steps_taken() + 1));

      stats.ctc += ctc_nll.item();
      stats.mlm += mlm_nll.item();
      stats.dlp += dlp_nll.item();
      stats.combined += loss.item();
      ++stats.n_used;
    }

    if (stats.n_used > 0) {
      stats.ctc /= static_cast<double>(stats.n_used);
      stats.mlm /= static_cast<double>(stats.n_used);
      stats.dlp /= static_cast<double>(stats.n_used);
      stats.combined /= static_cast<double>(stats.n_used);
    }
    if (log)
      *log << "epoch " << epoch << " step " << opt.steps_taken() << " ctc "
           << stats.ctc << " mlm " << stats.mlm << " dlp " << stats.dlp
           << " combined " << stats.combined << " used " << stats.n_used
           << " skipped " << stats.n_skipped << "\n";
    result.stats.push_back(stats);

    auto ckpt = checkpoint_from_model(model, epoch, opt.steps_taken());
    opt.append_state(ckpt);
    save_checkpoint(epoch_path(cfg.out_dir, epoch), ckpt);
  }

  for (int64_t e = 1; e <= cfg.epochs; ++e)
    result.epoch_checkpoints.push_back(epoch_path(cfg.out_dir, e));

  std::vector<Checkpoint> all;
  for (const auto& path : result.epoch_checkpoints)
    all.push_back(load_checkpoint(path));
  auto averaged = average_checkpoints(all);
  result.averaged_checkpoint = cfg.out_dir + "/averaged.mckp";
  save_checkpoint(result.averaged_checkpoint, averaged);
  return result;
}

}  // namespace mc::train
