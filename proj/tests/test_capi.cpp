#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "maskctc.h"

// Exercises the shared library exactly as an external consumer would: only
// maskctc.h symbols, no core headers.
namespace {

std::string grab(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  mc_string_free(s);
  return out;
}

struct Workspace {
  std::string root;
  std::string corpus_dir;
  std::string ckpt_dir;
  std::string averaged;
  mc_config* cfg = nullptr;
  std::vector<std::string> log_lines;
};

void set_all(mc_config* cfg,
             const std::vector<std::pair<const char*, const char*>>& kv) {
  for (const auto& [k, v] : kv) REQUIRE(mc_config_set(cfg, k, v) == MC_OK);
}

// Generates a corpus and trains one epoch, once per test binary run.
const Workspace& pipeline() {
  static Workspace ws = [] {
    Workspace w;
    w.root = (std::filesystem::temp_directory_path() / "mc_capi_ws").string();
    std::filesystem::remove_all(w.root);
    w.corpus_dir = w.root + "/corpus";
    w.ckpt_dir = w.root + "/ckpt";

    w.cfg = mc_config_new();
    REQUIRE(w.cfg != nullptr);
    set_all(w.cfg, {{"data.vocab_size", "3"},
                    {"data.min_len", "2"},
                    {"data.max_len", "4"},
                    {"data.dup_min", "2"},
                    {"data.dup_max", "3"},
                    {"data.sil_max", "1"},
                    {"data.noise_std", "0.05"},
                    {"data.feature_dim", "3"},
                    {"data.seed", "11"},
                    {"model.enc_layers", "1"},
                    {"model.dec_layers", "1"},
                    {"model.d_att", "8"},
                    {"model.heads", "2"},
                    {"model.ffn_dim", "8"},
                    {"model.conv_kernel", "3"},
                    {"model.downsample", "2"},
                    {"model.feature_dim", "3"},
                    {"model.length_classes", "6"},
                    {"model.dropout", "0.1"},
                    {"train.epochs", "1"},
                    {"train.lr", "0.003"},
                    {"train.warmup_steps", "10"},
                    {"train.seed", "4"},
                    {"train.out_dir", w.ckpt_dir.c_str()}});

    REQUIRE(mc_corpus_generate(w.cfg, 8, w.corpus_dir.c_str()) == MC_OK);
    auto log = [](const char* line, void* user) {
      static_cast<Workspace*>(user)->log_lines.emplace_back(line);
    };
    REQUIRE(mc_train_run(w.cfg, w.corpus_dir.c_str(), log, &w) == MC_OK);
    w.averaged = w.ckpt_dir + "/averaged.mckp";
    return w;
  }();
  return ws;
}

}  // namespace

TEST_CASE("version and error channel basics") {
  CHECK(mc_version() != nullptr);
  CHECK(mc_last_error() != nullptr);
  mc_string_free(nullptr);  // must be a no-op
  mc_config_free(nullptr);
  mc_corpus_free(nullptr);
  mc_engine_free(nullptr);
  mc_result_free(nullptr);
  mc_timings_free(nullptr);
}

TEST_CASE("config set, get, dump and file round-trip") {
  mc_config* cfg = mc_config_new();
  REQUIRE(cfg != nullptr);

  CHECK(mc_config_get(cfg, "decode.k") == nullptr);  // absent, no error
  CHECK(mc_config_set(cfg, "decode.k", "5") == MC_OK);
  CHECK(grab(mc_config_get(cfg, "decode.k")) == "5");
  CHECK(mc_config_set(cfg, "decode.k", "7") == MC_OK);  // last write wins
  CHECK(grab(mc_config_get(cfg, "decode.k")) == "7");

  CHECK(mc_config_set(cfg, "", "x") == MC_ERR_USAGE);
  CHECK(mc_config_set(nullptr, "a", "b") == MC_ERR_USAGE);
  CHECK(std::string(mc_last_error()) != "");

  const auto path =
      (std::filesystem::temp_directory_path() / "mc_capi_cfg.txt").string();
  {
    std::ofstream f(path);
    f << grab(mc_config_dump(cfg));
  }
  mc_config* reloaded = mc_config_new();
  CHECK(mc_config_load_file(reloaded, path.c_str()) == MC_OK);
  CHECK(grab(mc_config_get(reloaded, "decode.k")) == "7");

  CHECK(mc_config_load_file(reloaded, "/no/such/file") == MC_ERR_DATA);
  mc_config_free(reloaded);
  mc_config_free(cfg);
  std::filesystem::remove(path);
}

TEST_CASE("corpus generation and inspection") {
  const auto& ws = pipeline();
  mc_corpus* corpus = mc_corpus_open(ws.corpus_dir.c_str());
  REQUIRE(corpus != nullptr);
  CHECK(mc_corpus_size(corpus) == 8);

  const char* id0 = mc_corpus_utt_id(corpus, 0);
  REQUIRE(id0 != nullptr);
  CHECK(std::string(id0).substr(0, 1) == "u");

  auto ref = grab(mc_corpus_reference(corpus, 0));
  CHECK(ref.find('t') == 0);  // tokens are named t<i>
  CHECK(mc_corpus_utt_id(corpus, 99) == nullptr);
  CHECK(mc_corpus_reference(corpus, -1) == nullptr);

  CHECK(mc_corpus_open("/no/such/dir") == nullptr);
  CHECK(mc_last_status() == MC_ERR_DATA);
  CHECK(mc_corpus_generate(ws.cfg, 0, "/tmp/never") == MC_ERR_USAGE);
  CHECK(mc_last_status() == MC_ERR_USAGE);
  mc_corpus_free(corpus);
}

TEST_CASE("training reports progress and writes checkpoints") {
  const auto& ws = pipeline();
  REQUIRE(!ws.log_lines.empty());
  bool saw_epoch = false;
  for (const auto& line : ws.log_lines)
    if (line.find("epoch 1") != std::string::npos) saw_epoch = true;
  CHECK(saw_epoch);
  CHECK(std::filesystem::exists(ws.ckpt_dir + "/epoch-001.mckp"));
  CHECK(std::filesystem::exists(ws.averaged));

  CHECK(mc_train_run(ws.cfg, "/no/such/corpus", nullptr, nullptr) ==
        MC_ERR_DATA);
}

TEST_CASE("checkpoint averaging through the C interface") {
  const auto& ws = pipeline();
  const std::string epoch1 = ws.ckpt_dir + "/epoch-001.mckp";
  const std::string out = ws.root + "/avg3.mckp";
  const char* paths[3] = {epoch1.c_str(), epoch1.c_str(), epoch1.c_str()};

  CHECK(mc_checkpoint_average(paths, 3, out.c_str()) == MC_OK);
  mc_engine* engine = mc_engine_open(out.c_str());
  CHECK(engine != nullptr);
  mc_engine_free(engine);

  CHECK(mc_checkpoint_average(paths, 0, out.c_str()) == MC_ERR_USAGE);
  const char* bad[1] = {"/no/such.mckp"};
  CHECK(mc_checkpoint_average(bad, 1, out.c_str()) == MC_ERR_DATA);
}

TEST_CASE("engine decodes utterances under each strategy") {
  const auto& ws = pipeline();
  mc_engine* engine = mc_engine_open(ws.averaged.c_str());
  REQUIRE(engine != nullptr);

  auto info = nlohmann::json::parse(grab(mc_engine_info(engine)));
  CHECK(info.at("vocab_real").get<int>() == 3);
  CHECK(info.at("model.d_att").get<std::string>() == "8");

  mc_corpus* corpus = mc_corpus_open(ws.corpus_dir.c_str());
  REQUIRE(corpus != nullptr);

  mc_config* dcfg = mc_config_new();
  set_all(dcfg, {{"decode.strategy", "ctc_greedy"}});
  mc_result* greedy = mc_engine_decode(engine, corpus, 0, dcfg);
  REQUIRE(greedy != nullptr);
  CHECK(mc_result_decoder_forwards(greedy) == 0);
  CHECK(mc_result_encoder_forwards(greedy) == 1);
  CHECK(mc_result_wall_seconds(greedy) > 0.0);
  auto trace = nlohmann::json::parse(grab(mc_result_trace_json(greedy)));
  CHECK(trace.at("strategy") == "ctc_greedy");
  CHECK(trace.at("id") == std::string(mc_corpus_utt_id(corpus, 0)));
  mc_result_free(greedy);

  set_all(dcfg, {{"decode.strategy", "maskctc"}, {"decode.k", "4"}});
  mc_result* refined = mc_engine_decode(engine, corpus, 0, dcfg);
  REQUIRE(refined != nullptr);
  CHECK(mc_result_decoder_forwards(refined) <= 4);
  auto text = grab(mc_result_text(refined));
  if (!text.empty()) CHECK(text.find('t') == 0);
  mc_result_free(refined);

  // Misspelled keys inside a recognized section are rejected, not ignored.
  set_all(dcfg, {{"decode.K", "4"}});
  CHECK(mc_engine_decode(engine, corpus, 0, dcfg) == nullptr);
  CHECK(mc_last_status() == MC_ERR_USAGE);
  CHECK(std::string(mc_last_error()).find("decode.K") != std::string::npos);
  mc_config_free(dcfg);
  dcfg = mc_config_new();

  CHECK(mc_config_set(dcfg, "decode.strategy", "warp_drive") == MC_OK);
  CHECK(mc_engine_decode(engine, corpus, 0, dcfg) == nullptr);
  CHECK(std::string(mc_last_error()).find("strategy") != std::string::npos);

  CHECK(mc_engine_open("/no/such.mckp") == nullptr);
  mc_config_free(dcfg);
  mc_corpus_free(corpus);
  mc_engine_free(engine);
}

TEST_CASE("evaluation scores hypothesis files against references") {
  const auto& ws = pipeline();
  mc_corpus* corpus = mc_corpus_open(ws.corpus_dir.c_str());
  REQUIRE(corpus != nullptr);
  const long long n = mc_corpus_size(corpus);

  const std::string perfect = ws.root + "/perfect.hyp";
  {
    std::ofstream f(perfect);
    for (long long i = 0; i < n; ++i)
      f << mc_corpus_utt_id(corpus, i) << ' '
        << grab(mc_corpus_reference(corpus, i)) << '\n';
  }
  auto report = nlohmann::json::parse(grab(mc_eval_corpus(ws.corpus_dir.c_str(),
                                                          perfect.c_str())));
  CHECK(report.at("utterances").get<long long>() == n);
  CHECK(report.at("errors").get<long long>() == 0);
  CHECK(report.at("exact_matches").get<long long>() == n);
  CHECK(report.at("token_error_rate").get<double>() == 0.0);

  // One substituted token in the first utterance.
  const std::string flawed = ws.root + "/flawed.hyp";
  {
    std::ofstream f(flawed);
    for (long long i = 0; i < n; ++i) {
      auto ref = grab(mc_corpus_reference(corpus, i));
      if (i == 0) ref.replace(0, ref.find(' '), "zz");
      f << mc_corpus_utt_id(corpus, i) << ' ' << ref << '\n';
    }
  }
  report = nlohmann::json::parse(grab(mc_eval_corpus(ws.corpus_dir.c_str(),
                                                     flawed.c_str())));
  CHECK(report.at("substitutions").get<long long>() == 1);
  CHECK(report.at("errors").get<long long>() == 1);
  CHECK(report.at("exact_matches").get<long long>() == n - 1);

  // Missing and duplicate utterances are data errors.
  const std::string partial = ws.root + "/partial.hyp";
  {
    std::ofstream f(partial);
    f << mc_corpus_utt_id(corpus, 0) << " t0\n";
  }
  CHECK(mc_eval_corpus(ws.corpus_dir.c_str(), partial.c_str()) == nullptr);
  const std::string doubled = ws.root + "/doubled.hyp";
  {
    std::ofstream f(doubled);
    for (long long i = 0; i < n; ++i)
      f << mc_corpus_utt_id(corpus, i) << " t0\n";
    f << mc_corpus_utt_id(corpus, 0) << " t0\n";
  }
  CHECK(mc_eval_corpus(ws.corpus_dir.c_str(), doubled.c_str()) == nullptr);
  CHECK(mc_eval_corpus(ws.corpus_dir.c_str(), "/no/such.hyp") == nullptr);
  mc_corpus_free(corpus);
}

TEST_CASE("timing accumulator renders per-strategy summaries") {
  mc_timings* t = mc_timings_new();
  REQUIRE(t != nullptr);
  CHECK(mc_timings_add(t, "ctc_greedy", 0.010, 0, 1) == MC_OK);
  CHECK(mc_timings_add(t, "ctc_greedy", 0.014, 0, 1) == MC_OK);
  CHECK(mc_timings_add(t, "maskctc", 0.050, 10, 1) == MC_OK);
  CHECK(mc_timings_add(nullptr, "x", 0, 0, 0) == MC_ERR_USAGE);
  CHECK(mc_timings_add(t, nullptr, 0, 0, 0) == MC_ERR_USAGE);

  auto report = nlohmann::json::parse(grab(mc_timings_report_json(t)));
  REQUIRE(report.is_array());
  REQUIRE(report.size() == 2);
  CHECK(report[0].at("strategy") == "ctc_greedy");
  CHECK(report[0].at("n").get<int>() == 2);
  CHECK(report[0].at("mean_wall_seconds").get<double>() == doctest::Approx(0.012));
  CHECK(report[1].at("decoder_forwards").get<long long>() == 10);

  auto table = grab(mc_timings_report_table(t));
  CHECK(table.find("ctc_greedy") != std::string::npos);
  CHECK(table.find("maskctc") != std::string::npos);
  mc_timings_free(t);
}
