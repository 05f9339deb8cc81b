// Command-line front end. Links the shared C API only, so it doubles as a
// living example of driving the library from outside.
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "maskctc.h"

namespace {

struct ConfigDeleter {
  void operator()(mc_config* c) const { mc_config_free(c); }
};
struct CorpusDeleter {
  void operator()(mc_corpus* c) const { mc_corpus_free(c); }
};
struct EngineDeleter {
  void operator()(mc_engine* e) const { mc_engine_free(e); }
};
struct ResultDeleter {
  void operator()(mc_result* r) const { mc_result_free(r); }
};
struct TimingsDeleter {
  void operator()(mc_timings* t) const { mc_timings_free(t); }
};

using ConfigPtr = std::unique_ptr<mc_config, ConfigDeleter>;
using CorpusPtr = std::unique_ptr<mc_corpus, CorpusDeleter>;
using EnginePtr = std::unique_ptr<mc_engine, EngineDeleter>;
using ResultPtr = std::unique_ptr<mc_result, ResultDeleter>;
using TimingsPtr = std::unique_ptr<mc_timings, TimingsDeleter>;

// Nonzero statuses carry an exit code plus a recorded message.
int report_failure() {
  std::fprintf(stderr, "error: %s\n", mc_last_error());
  const int code = static_cast<int>(mc_last_status());
  return code == 0 ? 1 : code;
}

struct Failure {
  int code;
};

void require_ok(mc_status status) {
  if (status != MC_OK) throw Failure{report_failure()};
}

template <typename T>
T require_ptr(T ptr) {
  if (ptr == nullptr) throw Failure{report_failure()};
  return ptr;
}

std::string take_string(char* s) {
  std::string out = s == nullptr ? std::string() : std::string(s);
  mc_string_free(s);
  return out;
}

// --config file first, then --set key=value overrides in order.
ConfigPtr build_config(const std::string& path,
                       const std::vector<std::string>& sets) {
  ConfigPtr cfg(require_ptr(mc_config_new()));
  if (!path.empty()) require_ok(mc_config_load_file(cfg.get(), path.c_str()));
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                   kv.c_str());
      throw Failure{1};
    }
    require_ok(mc_config_set(cfg.get(), kv.substr(0, eq).c_str(),
                             kv.substr(eq + 1).c_str()));
  }
  return cfg;
}

std::string config_value(const mc_config* cfg, const char* key,
                         const std::string& fallback) {
  char* v = mc_config_get(cfg, key);
  return v == nullptr ? fallback : take_string(v);
}

struct DecodePassStats {
  long long decoder_forwards = 0;
  long long encoder_forwards = 0;
  double wall_seconds = 0.0;
};

// Decode every utterance, one hypothesis line each, optional trace lines.
DecodePassStats decode_corpus(const mc_engine* engine, const mc_corpus* corpus,
                              const mc_config* cfg, std::ostream& hyp_out,
                              std::ostream* trace_out, mc_timings* timings,
                              const std::string& timing_label) {
  DecodePassStats stats;
  const long long n = mc_corpus_size(corpus);
  for (long long i = 0; i < n; ++i) {
    ResultPtr result(require_ptr(mc_engine_decode(engine, corpus, i, cfg)));
    const auto text = take_string(mc_result_text(result.get()));
    hyp_out << mc_corpus_utt_id(corpus, i);
    if (!text.empty()) hyp_out << ' ' << text;
    hyp_out << '\n';
    if (trace_out != nullptr)
      *trace_out << take_string(mc_result_trace_json(result.get())) << '\n';
    stats.decoder_forwards += mc_result_decoder_forwards(result.get());
    stats.encoder_forwards += mc_result_encoder_forwards(result.get());
    stats.wall_seconds += mc_result_wall_seconds(result.get());
    if (timings != nullptr)
      require_ok(mc_timings_add(timings, timing_label.c_str(),
                                mc_result_wall_seconds(result.get()),
                                mc_result_decoder_forwards(result.get()),
                                mc_result_encoder_forwards(result.get())));
  }
  return stats;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out.good()) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    throw Failure{2};
  }
  return out;
}

int cmd_gen(const std::string& config_path, const std::vector<std::string>& sets,
            long long count, const std::string& out_dir) {
  auto cfg = build_config(config_path, sets);
  require_ok(mc_corpus_generate(cfg.get(), count, out_dir.c_str()));
  std::printf("wrote %lld utterances to %s\n", count, out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& corpus) {
  auto cfg = build_config(config_path, sets);
  auto log = [](const char* line, void*) { std::printf("%s\n", line); };
  require_ok(mc_train_run(cfg.get(), corpus.c_str(), log, nullptr));
  std::printf("checkpoints in %s\n",
              config_value(cfg.get(), "train.out_dir", "checkpoints").c_str());
  return 0;
}

int cmd_avg(const std::vector<std::string>& paths, const std::string& out) {
  std::vector<const char*> raw;
  raw.reserve(paths.size());
  for (const auto& p : paths) raw.push_back(p.c_str());
  require_ok(mc_checkpoint_average(raw.data(),
                                   static_cast<long long>(raw.size()),
                                   out.c_str()));
  std::printf("averaged %zu checkpoints into %s\n", paths.size(), out.c_str());
  return 0;
}

int cmd_decode(const std::string& config_path,
               const std::vector<std::string>& sets,
               const std::string& checkpoint, const std::string& corpus_dir,
               const std::string& hyp_path, const std::string& trace_path,
               bool sweep) {
  auto cfg = build_config(config_path, sets);
  EnginePtr engine(require_ptr(mc_engine_open(checkpoint.c_str())));
  CorpusPtr corpus(require_ptr(mc_corpus_open(corpus_dir.c_str())));

  if (!sweep) {
    auto hyp = open_out(hyp_path);
    std::ofstream trace;
    if (!trace_path.empty()) trace = open_out(trace_path);
    auto stats = decode_corpus(engine.get(), corpus.get(), cfg.get(), hyp,
                               trace_path.empty() ? nullptr : &trace, nullptr,
                               "");
    std::printf("%lld hypotheses -> %s (decoder forwards %lld, wall %.3fs)\n",
                mc_corpus_size(corpus.get()), hyp_path.c_str(),
                stats.decoder_forwards, stats.wall_seconds);
    return 0;
  }

  // Sweep the published iteration budgets; K=0 is the plain CTC column.
  const std::string base_strategy =
      config_value(cfg.get(), "decode.strategy", "maskctc");
  for (long long k : {0LL, 1LL, 5LL, 10LL}) {
    if (k == 0) {
      require_ok(mc_config_set(cfg.get(), "decode.strategy", "ctc_greedy"));
    } else {
      require_ok(
          mc_config_set(cfg.get(), "decode.strategy", base_strategy.c_str()));
      require_ok(mc_config_set(cfg.get(), "decode.k",
                               std::to_string(k).c_str()));
    }
    const std::string suffix = ".K" + std::to_string(k);
    auto hyp = open_out(hyp_path + suffix);
    std::ofstream trace;
    if (!trace_path.empty()) trace = open_out(trace_path + suffix);
    auto stats = decode_corpus(engine.get(), corpus.get(), cfg.get(), hyp,
                               trace_path.empty() ? nullptr : &trace, nullptr,
                               "");
    std::printf("K=%-2lld strategy=%-13s decoder_forwards=%-6lld wall=%.3fs -> %s\n",
                k, k == 0 ? "ctc_greedy" : base_strategy.c_str(),
                stats.decoder_forwards, stats.wall_seconds,
                (hyp_path + suffix).c_str());
  }
  return 0;
}

int cmd_eval(const std::string& corpus_dir, const std::string& hyp_path) {
  const auto report = take_string(
      require_ptr(mc_eval_corpus(corpus_dir.c_str(), hyp_path.c_str())));
  std::printf("%s\n", report.c_str());
  return 0;
}

int cmd_bench(const std::string& config_path,
              const std::vector<std::string>& sets,
              const std::string& checkpoint, const std::string& corpus_dir,
              std::vector<std::string> strategies, long long repeats,
              long long limit, bool json) {
  auto cfg = build_config(config_path, sets);
  EnginePtr engine(require_ptr(mc_engine_open(checkpoint.c_str())));
  CorpusPtr corpus(require_ptr(mc_corpus_open(corpus_dir.c_str())));
  TimingsPtr timings(require_ptr(mc_timings_new()));

  const long long n = mc_corpus_size(corpus.get());
  const long long used = limit > 0 && limit < n ? limit : n;
  for (const auto& strategy : strategies) {
    require_ok(
        mc_config_set(cfg.get(), "decode.strategy", strategy.c_str()));
    for (long long r = 0; r < repeats; ++r)
      for (long long i = 0; i < used; ++i) {
        ResultPtr result(
            require_ptr(mc_engine_decode(engine.get(), corpus.get(), i,
                                         cfg.get())));
        require_ok(mc_timings_add(timings.get(), strategy.c_str(),
                                  mc_result_wall_seconds(result.get()),
                                  mc_result_decoder_forwards(result.get()),
                                  mc_result_encoder_forwards(result.get())));
      }
  }
  std::printf("%lld utterances x %lld repeats\n", used, repeats);
  if (json) {
    std::printf("%s\n",
                take_string(mc_timings_report_json(timings.get())).c_str());
  } else {
    std::printf("%s",
                take_string(mc_timings_report_table(timings.get())).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mask-refinement CTC recognition toolkit"};
  app.require_subcommand(1);

  std::string config_path, corpus_dir, out_dir, checkpoint, hyp_path,
      trace_path, avg_out;
  std::vector<std::string> sets, avg_paths, strategies = {
      "ctc_greedy", "maskctc", "shrink_expand"};
  long long count = 0, repeats = 3, limit = 0;
  bool sweep = false, bench_json = false;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", sets, "override: key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  add_config_opts(gen);
  gen->add_option("-n,--count", count, "number of utterances")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir, "corpus directory")->required();

  auto* tr = app.add_subcommand("train", "train a model on a corpus");
  add_config_opts(tr);
  tr->add_option("--corpus", corpus_dir, "corpus directory")->required();

  auto* avg = app.add_subcommand("avg", "average checkpoints");
  avg->add_option("checkpoints", avg_paths, "checkpoint files")
      ->required()
      ->expected(-1);
  avg->add_option("--out", avg_out, "output checkpoint")->required();

  auto* dec = app.add_subcommand("decode", "decode a corpus to hypotheses");
  add_config_opts(dec);
  dec->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  dec->add_option("--corpus", corpus_dir, "corpus directory")->required();
  dec->add_option("--hyp", hyp_path, "hypothesis output file")->required();
  dec->add_option("--trace", trace_path, "trace JSONL output file");
  dec->add_flag("--sweep", sweep,
                "decode at K in {0,1,5,10}; writes <hyp>.K<k> files");

  auto* ev = app.add_subcommand("eval", "score a hypothesis file");
  ev->add_option("--corpus", corpus_dir, "corpus directory")->required();
  ev->add_option("--hyp", hyp_path, "hypothesis file")->required();

  auto* bench = app.add_subcommand("bench", "time decoding strategies");
  add_config_opts(bench);
  bench->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  bench->add_option("--corpus", corpus_dir, "corpus directory")->required();
  bench->add_option("--strategies", strategies, "strategies to time")
      ->delimiter(',');
  bench->add_option("--repeats", repeats, "passes per strategy")
      ->check(CLI::PositiveNumber);
  bench->add_option("--limit", limit, "use only the first N utterances");
  bench->add_flag("--json", bench_json, "print the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(config_path, sets, count, out_dir);
    if (tr->parsed()) return cmd_train(config_path, sets, corpus_dir);
    if (avg->parsed()) return cmd_avg(avg_paths, avg_out);
    if (dec->parsed())
      return cmd_decode(config_path, sets, checkpoint, corpus_dir, hyp_path,
                        trace_path, sweep);
    if (ev->parsed()) return cmd_eval(corpus_dir, hyp_path);
    if (bench->parsed())
      return cmd_bench(config_path, sets, checkpoint, corpus_dir, strategies,
                       repeats, limit, bench_json);
  } catch (const Failure& f) {
    return f.code;
  }
  return 1;
}
