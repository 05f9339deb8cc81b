#include "core/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "core/wire.hpp"
#include "json.hpp"

namespace mc {
namespace {

// Draws k distinct values from 0..n-1 by a partial Fisher-Yates shuffle;
// returned in draw order, not sorted.
std::vector<int64_t> draw_distinct(int64_t n, int64_t k, Rng& rng) {
  std::vector<int64_t> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) {
    const int64_t j = rng.uniform_int(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    out.push_back(pool[static_cast<size_t>(i)]);
  }
  return out;
}

std::string utt_id(int64_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%06lld", static_cast<long long>(index));
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  MC_CHECK(vocab_size >= 1, "vocab_size must be positive");
  MC_CHECK(min_len >= 1 && max_len >= min_len, "need max_len >= min_len >= 1");
  MC_CHECK(dup_min >= 1 && dup_max >= dup_min, "need dup_max >= dup_min >= 1");
  MC_CHECK(sil_min >= 0 && sil_max >= sil_min, "need sil_max >= sil_min >= 0");
  MC_CHECK(noise_std >= 0.0, "noise_std must be non-negative");
  MC_CHECK(feature_dim >= 1, "feature_dim must be positive");
}

SynthConfig SynthConfig::from_config(const Config& cfg) {
  cfg.check_section("data.", {"vocab_size", "min_len", "max_len", "dup_min",
                              "dup_max", "sil_min", "sil_max", "noise_std",
                              "feature_dim", "seed", "proto_seed"});
  SynthConfig s;
  s.vocab_size = cfg.get_int("data.vocab_size", s.vocab_size);
  s.min_len = cfg.get_int("data.min_len", s.min_len);
  s.max_len = cfg.get_int("data.max_len", s.max_len);
  s.dup_min = cfg.get_int("data.dup_min", s.dup_min);
  s.dup_max = cfg.get_int("data.dup_max", s.dup_max);
  s.sil_min = cfg.get_int("data.sil_min", s.sil_min);
  s.sil_max = cfg.get_int("data.sil_max", s.sil_max);
  s.noise_std = cfg.get_double("data.noise_std", s.noise_std);
  s.feature_dim = cfg.get_int("data.feature_dim", s.feature_dim);
  s.seed = cfg.get_u64("data.seed", s.seed);
  s.proto_seed = cfg.get_u64("data.proto_seed", s.proto_seed);
  s.validate();
  return s;
}

void SynthConfig::write_to(Config& cfg) const {
  cfg.set("data.vocab_size", std::to_string(vocab_size));
  cfg.set("data.min_len", std::to_string(min_len));
  cfg.set("data.max_len", std::to_string(max_len));
  cfg.set("data.dup_min", std::to_string(dup_min));
  cfg.set("data.dup_max", std::to_string(dup_max));
  cfg.set("data.sil_min", std::to_string(sil_min));
  cfg.set("data.sil_max", std::to_string(sil_max));
  cfg.set_double("data.noise_std", noise_std);
  cfg.set("data.feature_dim", std::to_string(feature_dim));
  cfg.set("data.seed", std::to_string(seed));
  cfg.set("data.proto_seed", std::to_string(proto_seed));
}

Tensor make_prototypes(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::mix(cfg.proto_seed, 0x50524F544FULL));
  std::vector<double> vals(static_cast<size_t>(cfg.vocab_size * cfg.feature_dim));
  for (auto& v : vals) v = rng.normal();
  return Tensor::from_vector({cfg.vocab_size, cfg.feature_dim}, std::move(vals));
}

std::vector<Utterance> generate_corpus(const SynthConfig& cfg, int64_t n) {
  cfg.validate();
  MC_CHECK(n >= 1, "corpus size must be positive");
  const Tensor protos = make_prototypes(cfg);
  auto proto_row = [&](int64_t tok) {
    return protos.data().subspan(static_cast<size_t>(tok * cfg.feature_dim),
                                 static_cast<size_t>(cfg.feature_dim));
  };

  std::vector<Utterance> corpus;
  corpus.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(Rng::mix(cfg.seed, static_cast<uint64_t>(i)));
    Utterance utt;
    utt.id = utt_id(i);

    const int64_t len = rng.uniform_int(cfg.min_len, cfg.max_len);
    utt.reference.reserve(static_cast<size_t>(len));
    for (int64_t k = 0; k < len; ++k)
      utt.reference.push_back(rng.uniform_int(0, cfg.vocab_size - 1));

    std::vector<double> frames;
    for (int64_t k = 0; k < len; ++k) {
      if (k > 0) {
        const int64_t sil = rng.uniform_int(cfg.sil_min, cfg.sil_max);
        frames.insert(frames.end(), static_cast<size_t>(sil * cfg.feature_dim), 0.0);
      }
      const auto row = proto_row(utt.reference[static_cast<size_t>(k)]);
      const int64_t dup = rng.uniform_int(cfg.dup_min, cfg.dup_max);
      for (int64_t d = 0; d < dup; ++d)
        frames.insert(frames.end(), row.begin(), row.end());
    }
    if (cfg.noise_std > 0.0)
      for (auto& v : frames) v += cfg.noise_std * rng.normal();

    const int64_t t = static_cast<int64_t>(frames.size()) / cfg.feature_dim;
    utt.features = Tensor::from_vector({t, cfg.feature_dim}, std::move(frames));
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<int64_t> corrupt_reference(const std::vector<int64_t>& y, int64_t n_real,
                                       Rng& rng, int64_t n_sub, int64_t n_del,
                                       int64_t n_ins) {
  const int64_t len = static_cast<int64_t>(y.size());
  MC_CHECK(n_real >= 1, "alphabet must be non-empty");
  MC_CHECK(n_sub >= 0 && n_del >= 0 && n_ins >= 0, "edit counts must be non-negative");
  MC_CHECK(n_sub + n_del <= len, "cannot edit " + std::to_string(n_sub + n_del) +
                                     " distinct positions of a length-" +
                                     std::to_string(len) + " sequence");
  MC_CHECK(n_sub == 0 || n_real >= 2,
           "substitution needs at least two tokens to choose from");
  for (int64_t tok : y)
    MC_CHECK(tok >= 0 && tok < n_real, "token id out of range: " + std::to_string(tok));

  // First n_sub drawn positions are substituted, the rest deleted.
  const auto positions = draw_distinct(len, n_sub + n_del, rng);
  std::vector<int8_t> deleted(y.size(), 0);
  std::vector<int64_t> out = y;
  for (size_t k = 0; k < positions.size(); ++k) {
    const auto pos = static_cast<size_t>(positions[k]);
    if (static_cast<int64_t>(k) < n_sub) {
      int64_t replacement = rng.uniform_int(0, n_real - 2);
      if (replacement >= y[pos]) ++replacement;
      out[pos] = replacement;
    } else {
      deleted[pos] = 1;
    }
  }
  std::vector<int64_t> kept;
  kept.reserve(out.size());
  for (size_t i = 0; i < out.size(); ++i)
    if (!deleted[i]) kept.push_back(out[i]);

  for (int64_t k = 0; k < n_ins; ++k) {
    const int64_t gap = rng.uniform_int(0, static_cast<int64_t>(kept.size()));
    kept.insert(kept.begin() + gap, rng.uniform_int(0, n_real - 1));
  }
  return kept;
}

void save_corpus(const std::string& dir, const std::vector<Utterance>& corpus) {
  MC_CHECK(!corpus.empty(), "refusing to save an empty corpus");
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir + "/manifest.jsonl";
  const auto features_path = dir + "/features.bin";

  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw io_error("cannot write " + manifest_path);
  std::string packed;
  for (const auto& utt : corpus) {
    MC_CHECK(utt.features.ndim() == 2, "utterance features must be [T x D]");
    nlohmann::json line{{"id", utt.id},
                        {"reference", utt.reference},
                        {"frames", utt.features.size(0)},
                        {"dim", utt.features.size(1)},
                        {"offset", packed.size()}};
    manifest << line.dump() << "\n";
    for (double v : utt.features.data()) wire::put_f64(packed, v);
  }
  if (!manifest) throw io_error("short write on " + manifest_path);
  manifest.close();

  std::ofstream features(features_path, std::ios::binary | std::ios::trunc);
  if (!features) throw io_error("cannot write " + features_path);
  features.write(packed.data(), static_cast<std::streamsize>(packed.size()));
  if (!features) throw io_error("short write on " + features_path);
}

std::vector<Utterance> load_corpus(const std::string& dir) {
  const auto manifest_path = dir + "/manifest.jsonl";
  const auto features_path = dir + "/features.bin";

  std::ifstream features(features_path, std::ios::binary);
  if (!features) throw io_error("cannot read " + features_path);
  std::string packed((std::istreambuf_iterator<char>(features)),
                     std::istreambuf_iterator<char>());

  std::ifstream manifest(manifest_path);
  if (!manifest) throw io_error("cannot read " + manifest_path);

  std::vector<Utterance> corpus;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Utterance utt;
      utt.id = j.at("id").get<std::string>();
      utt.reference = j.at("reference").get<std::vector<int64_t>>();
      const auto frames = j.at("frames").get<int64_t>();
      const auto dim = j.at("dim").get<int64_t>();
      const auto offset = j.at("offset").get<uint64_t>();
      MC_CHECK(frames >= 0 && dim >= 1, "bad shape in manifest line " +
                                            std::to_string(line_no));
      const uint64_t n_bytes = static_cast<uint64_t>(frames * dim) * 8;
      if (offset + n_bytes > packed.size())
        throw data_error("manifest line " + std::to_string(line_no) +
                         " points past the end of " + features_path);
      std::vector<double> vals(static_cast<size_t>(frames * dim));
      for (size_t k = 0; k < vals.size(); ++k) {
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
          bits |= static_cast<uint64_t>(static_cast<unsigned char>(
                      packed[offset + k * 8 + static_cast<size_t>(b)]))
                  << (8 * b);
        vals[k] = std::bit_cast<double>(bits);
      }
      utt.features = Tensor::from_vector({frames, dim}, std::move(vals));
      corpus.push_back(std::move(utt));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("bad manifest line " + std::to_string(line_no) + " in " +
                       manifest_path + ": " + e.what());
    }
  }
  MC_CHECK(!corpus.empty(), "empty corpus manifest: " + manifest_path);
  return corpus;
}

}  // namespace mc
