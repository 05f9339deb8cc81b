#include "maskctc.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <streambuf>
#include <string>
#include <utility>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/decoding.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/synthdata.hpp"
#include "core/train.hpp"
#include "json.hpp"

// Opaque handle bodies. The header declares them as plain struct tags, so
// the definitions live in the global namespace.
struct mc_config {
  mc::Config cfg;
};

struct mc_corpus {
  std::vector<mc::Utterance> utts;
  mc::Vocabulary vocab;  // canonical names for the reference token ids
};

struct mc_engine {
  mc::Model model;
  int64_t epoch = 0;
  int64_t step = 0;
  explicit mc_engine(mc::Model m) : model(std::move(m)) {}
};

struct mc_result {
  std::string utt_id;
  std::string text;
  mc::decoding::DecodeTrace trace;
  double wall_seconds = 0.0;
};

struct mc_timings {
  std::vector<mc::metrics::TimingRow> rows;
};

namespace {

thread_local std::string t_error;
thread_local mc_status t_status = MC_OK;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mc_status classify(const std::exception& e) {
  if (dynamic_cast<const mc::data_error*>(&e) != nullptr ||
      dynamic_cast<const mc::io_error*>(&e) != nullptr)
    return MC_ERR_DATA;
  return MC_ERR_USAGE;
}

mc_status fail(const std::exception& e) {
  t_error = e.what();
  t_status = classify(e);
  return t_status;
}

mc_status usage(const std::string& msg) {
  t_error = msg;
  t_status = MC_ERR_USAGE;
  return MC_ERR_USAGE;
}

template <typename F>
mc_status guarded(F&& body) {
  try {
    body();
    return MC_OK;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

// Pointer-returning variant: NULL signals failure.
template <typename F>
auto guarded_ptr(F&& make) -> decltype(make()) {
  try {
    return make();
  } catch (const std::exception& e) {
    fail(e);
    return nullptr;
  }
}

void set_usage_error(const std::string& msg) {
  t_error = msg;
  t_status = MC_ERR_USAGE;
}

std::string join_tokens(const mc::Vocabulary& vocab,
                        const std::vector<int64_t>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

// Forwards complete lines written by train() to the caller's callback.
class line_forwarder : public std::streambuf {
 public:
  line_forwarder(mc_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~line_forwarder() override {
    if (!buf_.empty()) fn_(buf_.c_str(), user_);
  }

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    if (ch == '\n') {
      fn_(buf_.c_str(), user_);
      buf_.clear();
    } else {
      buf_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  mc_log_fn fn_;
  void* user_;
  std::string buf_;
};

}  // namespace

extern "C" {

const char* mc_version(void) { return "0.1.0"; }

const char* mc_last_error(void) { return t_error.c_str(); }

mc_status mc_last_status(void) { return t_status; }

void mc_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------------ config */

mc_config* mc_config_new(void) {
  return guarded_ptr([] { return new mc_config(); });
}

mc_status mc_config_load_file(mc_config* cfg, const char* path) {
  if (cfg == nullptr || path == nullptr) return usage("null argument");
  return guarded([&] {
    mc::Config loaded = mc::Config::load(path);
    for (const auto& key : loaded.keys()) cfg->cfg.set(key, loaded.get_str(key));
  });
}

mc_status mc_config_set(mc_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr)
    return usage("null argument");
  if (*key == '\0') return usage("empty config key");
  return guarded([&] { cfg->cfg.set(key, value); });
}

char* mc_config_get(const mc_config* cfg, const char* key) {
  if (cfg == nullptr || key == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  if (!cfg->cfg.has(key)) return nullptr;
  return guarded_ptr([&] { return dup_string(cfg->cfg.get_str(key)); });
}

char* mc_config_dump(const mc_config* cfg) {
  if (cfg == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] { return dup_string(cfg->cfg.to_string()); });
}

void mc_config_free(mc_config* cfg) { delete cfg; }

/* ------------------------------------------------------------------ corpus */

mc_status mc_corpus_generate(const mc_config* cfg, long long n_utterances,
                             const char* dir) {
  if (cfg == nullptr || dir == nullptr) return usage("null argument");
  if (n_utterances < 1) return usage("corpus size must be >= 1");
  return guarded([&] {
    auto synth = mc::SynthConfig::from_config(cfg->cfg);
    auto corpus = mc::generate_corpus(synth, n_utterances);
    mc::save_corpus(dir, corpus);
  });
}

mc_corpus* mc_corpus_open(const char* dir) {
  if (dir == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&]() -> mc_corpus* {
    auto out = std::make_unique<mc_corpus>();
    out->utts = mc::load_corpus(dir);
    int64_t n_real = 1;
    for (const auto& utt : out->utts)
      for (int64_t tok : utt.reference)
        if (tok + 1 > n_real) n_real = tok + 1;
    out->vocab = mc::Vocabulary::make(n_real);
    return out.release();
  });
}

long long mc_corpus_size(const mc_corpus* corpus) {
  return corpus == nullptr ? 0 : static_cast<long long>(corpus->utts.size());
}

const char* mc_corpus_utt_id(const mc_corpus* corpus, long long index) {
  if (corpus == nullptr || index < 0 ||
      index >= static_cast<long long>(corpus->utts.size())) {
    set_usage_error("utterance index out of range");
    return nullptr;
  }
  return corpus->utts[static_cast<size_t>(index)].id.c_str();
}

char* mc_corpus_reference(const mc_corpus* corpus, long long index) {
  if (corpus == nullptr || index < 0 ||
      index >= static_cast<long long>(corpus->utts.size())) {
    set_usage_error("utterance index out of range");
    return nullptr;
  }
  return guarded_ptr([&] {
    return dup_string(join_tokens(
        corpus->vocab, corpus->utts[static_cast<size_t>(index)].reference));
  });
}

void mc_corpus_free(mc_corpus* corpus) { delete corpus; }

/* ---------------------------------------------------------------- training */

mc_status mc_train_run(const mc_config* cfg, const char* corpus_dir,
                       mc_log_fn log, void* user) {
  if (cfg == nullptr || corpus_dir == nullptr) return usage("null argument");
  return guarded([&] {
    auto corpus = mc::load_corpus(corpus_dir);
    auto synth = mc::SynthConfig::from_config(cfg->cfg);
    auto model_cfg = mc::ModelConfig::from_config(cfg->cfg);
    auto train_cfg = mc::train::TrainConfig::from_config(cfg->cfg);
    const uint64_t model_seed = cfg->cfg.get_u64("model.seed", 1);

    mc::Model model(model_cfg, mc::Vocabulary::make(synth.vocab_size),
                    model_seed);
    if (log != nullptr) {
      line_forwarder sink(log, user);
      std::ostream stream(&sink);
      mc::train::train(model, corpus, train_cfg, &stream);
    } else {
      mc::train::train(model, corpus, train_cfg);
    }
  });
}

mc_status mc_checkpoint_average(const char* const* paths, long long n,
                                const char* out_path) {
  if (paths == nullptr || out_path == nullptr) return usage("null argument");
  if (n < 1) return usage("need at least one checkpoint to average");
  return guarded([&] {
    std::vector<mc::Checkpoint> all;
    for (long long i = 0; i < n; ++i) {
      MC_CHECK(paths[i] != nullptr, "null checkpoint path");
      all.push_back(mc::load_checkpoint(paths[i]));
    }
    mc::save_checkpoint(out_path, mc::average_checkpoints(all));
  });
}

/* ------------------------------------------------------------------ engine */

mc_engine* mc_engine_open(const char* checkpoint_path) {
  if (checkpoint_path == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&]() -> mc_engine* {
    auto ckpt = mc::load_checkpoint(checkpoint_path);
    auto out = std::make_unique<mc_engine>(mc::model_from_checkpoint(ckpt));
    out->epoch = ckpt.epoch;
    out->step = ckpt.step;
    return out.release();
  });
}

char* mc_engine_info(const mc_engine* engine) {
  if (engine == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] {
    mc::Config flat;
    engine->model.config().write_to(flat);
    nlohmann::json info;
    for (const auto& key : flat.keys()) info[key] = flat.get_str(key);
    info["vocab_real"] = engine->model.vocab().n_real();
    info["epoch"] = engine->epoch;
    info["step"] = engine->step;
    return dup_string(info.dump());
  });
}

void mc_engine_free(mc_engine* engine) { delete engine; }

mc_result* mc_engine_decode(const mc_engine* engine, const mc_corpus* corpus,
                            long long index, const mc_config* cfg) {
  if (engine == nullptr || corpus == nullptr || cfg == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  if (index < 0 || index >= static_cast<long long>(corpus->utts.size())) {
    set_usage_error("utterance index out of range");
    return nullptr;
  }
  return guarded_ptr([&]() -> mc_result* {
    auto decode_cfg = mc::decoding::DecodeConfig::from_config(cfg->cfg);
    const auto& utt = corpus->utts[static_cast<size_t>(index)];

    const auto start = std::chrono::steady_clock::now();
    auto decoded = mc::decoding::decode(engine->model, utt.features, decode_cfg);
    const auto stop = std::chrono::steady_clock::now();

    auto out = std::make_unique<mc_result>();
    out->utt_id = utt.id;
    out->text = join_tokens(engine->model.vocab(), decoded.tokens);
    out->trace = std::move(decoded.trace);
    out->wall_seconds =
        std::chrono::duration<double>(stop - start).count();
    return out.release();
  });
}

char* mc_result_text(const mc_result* result) {
  if (result == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] { return dup_string(result->text); });
}

char* mc_result_trace_json(const mc_result* result) {
  if (result == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] {
    return dup_string(mc::decoding::trace_to_json_line(result->utt_id,
                                                       result->trace));
  });
}

long long mc_result_decoder_forwards(const mc_result* result) {
  return result == nullptr ? 0 : result->trace.decoder_forward_count;
}

long long mc_result_encoder_forwards(const mc_result* result) {
  return result == nullptr ? 0 : result->trace.encoder_forward_count;
}

double mc_result_wall_seconds(const mc_result* result) {
  return result == nullptr ? 0.0 : result->wall_seconds;
}

void mc_result_free(mc_result* result) { delete result; }

/* ----------------------------------------------------------------- scoring */

char* mc_eval_corpus(const char* corpus_dir, const char* hyp_path) {
  if (corpus_dir == nullptr || hyp_path == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&]() -> char* {
    auto utts = mc::load_corpus(corpus_dir);
    int64_t n_real = 1;
    for (const auto& utt : utts)
      for (int64_t tok : utt.reference)
        if (tok + 1 > n_real) n_real = tok + 1;
    auto vocab = mc::Vocabulary::make(n_real);

    std::ifstream in(hyp_path);
    if (!in.good()) throw mc::io_error(std::string("cannot open ") + hyp_path);
    std::map<std::string, std::vector<std::string>> hyps;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream fields(line);
      std::string id;
      if (!(fields >> id)) continue;  // blank line
      if (hyps.count(id) != 0)
        throw mc::data_error("hypothesis line " + std::to_string(lineno) +
                             ": duplicate utterance " + id);
      auto& tokens = hyps[id];
      std::string tok;
      while (fields >> tok) tokens.push_back(tok);
    }

    // Tokens are compared as strings; interning makes them comparable ids.
    std::map<std::string, int64_t> intern;
    auto to_ids = [&intern](const std::vector<std::string>& names) {
      std::vector<int64_t> ids;
      ids.reserve(names.size());
      for (const auto& name : names)
        ids.push_back(intern.emplace(name, static_cast<int64_t>(intern.size()))
                          .first->second);
      return ids;
    };

    mc::metrics::EditStats total;
    int64_t ref_tokens = 0;
    int64_t exact = 0;
    for (const auto& utt : utts) {
      auto it = hyps.find(utt.id);
      if (it == hyps.end())
        throw mc::data_error("hypothesis file misses utterance " + utt.id);
      std::vector<std::string> ref_names;
      ref_names.reserve(utt.reference.size());
      for (int64_t tok : utt.reference) ref_names.push_back(vocab.token(tok));

      auto stats = mc::metrics::edit_distance(to_ids(it->second), to_ids(ref_names));
      total.sub += stats.sub;
      total.del += stats.del;
      total.ins += stats.ins;
      ref_tokens += static_cast<int64_t>(utt.reference.size());
      if (stats.total() == 0) ++exact;
      hyps.erase(it);
    }
    if (!hyps.empty())
      throw mc::data_error("hypothesis file has unknown utterance " +
                           hyps.begin()->first);

    nlohmann::json report;
    report["utterances"] = utts.size();
    report["ref_tokens"] = ref_tokens;
    report["substitutions"] = total.sub;
    report["deletions"] = total.del;
    report["insertions"] = total.ins;
    report["errors"] = total.total();
    report["exact_matches"] = exact;
    report["token_error_rate"] = total.wer(ref_tokens);
    return dup_string(report.dump());
  });
}

mc_timings* mc_timings_new(void) {
  return guarded_ptr([] { return new mc_timings(); });
}

mc_status mc_timings_add(mc_timings* timings, const char* strategy,
                         double wall_seconds, long long decoder_forwards,
                         long long encoder_forwards) {
  if (timings == nullptr || strategy == nullptr) return usage("null argument");
  return guarded([&] {
    timings->rows.push_back({strategy, wall_seconds, decoder_forwards,
                             encoder_forwards});
  });
}

char* mc_timings_report_json(const mc_timings* timings) {
  if (timings == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] {
    return dup_string(mc::metrics::timing_report_json(
        mc::metrics::summarize_timings(timings->rows)));
  });
}

char* mc_timings_report_table(const mc_timings* timings) {
  if (timings == nullptr) {
    set_usage_error("null argument");
    return nullptr;
  }
  return guarded_ptr([&] {
    return dup_string(mc::metrics::timing_report_table(
        mc::metrics::summarize_timings(timings->rows)));
  });
}

void mc_timings_free(mc_timings* timings) { delete timings; }

}  // extern "C"
