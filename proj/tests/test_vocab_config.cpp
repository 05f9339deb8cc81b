#include "core/config.hpp"
#include "core/vocab.hpp"
#include "doctest.h"

using namespace mc;

TEST_CASE("vocabulary layout: real tokens then blank, mask, pad") {
  Vocabulary v = Vocabulary::make(5);
  CHECK(v.n_real() == 5);
  CHECK(v.size() == 8);
  CHECK(v.blank_id() == 5);
  CHECK(v.mask_id() == 6);
  CHECK(v.pad_id() == 7);
  CHECK(v.is_real(0));
  CHECK(v.is_real(4));
  CHECK(!v.is_real(5));
  CHECK(!v.is_real(-1));
  CHECK(v.token(0) == "t0");
  CHECK(v.token(5) == "<blank>");
  CHECK(v.token(6) == "<mask>");
  CHECK(v.token(7) == "<pad>");
  CHECK(v.id_of("t3") == 3);
  CHECK(v.id_of("<mask>") == 6);
  CHECK_THROWS_AS(v.id_of("nope"), data_error);
  CHECK_THROWS_AS(v.token(8), value_error);
  CHECK(v.real_tokens().size() == 5);
}

TEST_CASE("vocabulary rejects bad inputs") {
  CHECK_THROWS_AS(Vocabulary::make(0), value_error);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "a"}), value_error);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<mask>"}), value_error);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"has space"}), value_error);
}

TEST_CASE("config parses key-value lines with comments") {
  Config cfg = Config::from_string(
      "# a comment\n"
      "alpha = 0.3\n"
      "epochs=10  # trailing comment\n"
      "  name =  toy run \n"
      "flag = true\n"
      "seed = 12345\n"
      "\n");
  CHECK(cfg.get_double("alpha") == 0.3);
  CHECK(cfg.get_int("epochs") == 10);
  CHECK(cfg.get_str("name") == "toy run");
  CHECK(cfg.get_bool("flag"));
  CHECK(cfg.get_u64("seed") == 12345);
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK(cfg.get_bool("missing", false) == false);
  CHECK(cfg.has("alpha"));
  CHECK(!cfg.has("beta"));
}

TEST_CASE("config type and parse errors") {
  Config cfg = Config::from_string("x = hello\n");
  CHECK_THROWS_AS(cfg.get_int("x"), data_error);
  CHECK_THROWS_AS(cfg.get_double("x"), data_error);
  CHECK_THROWS_AS(cfg.get_bool("x"), data_error);
  CHECK_THROWS_AS(cfg.get_str("missing"), data_error);
  CHECK_THROWS_AS(Config::from_string("justakey\n"), data_error);
  CHECK_THROWS_AS(Config::from_string("= novalue\n"), data_error);
  CHECK_THROWS_AS(Config::load("/nonexistent/path.cfg"), io_error);
}

TEST_CASE("config round-trips through to_string and overrides take effect") {
  Config cfg = Config::from_string("b = 2\na = 1\n");
  cfg.set("a", "10");
  Config again = Config::from_string(cfg.to_string());
  CHECK(again.get_int("a") == 10);
  CHECK(again.get_int("b") == 2);
  CHECK(again.keys() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("config section check flags unknown keys without touching others") {
  Config cfg = Config::from_string(
      "decode.k = 5\ndecode.strategy = maskctc\ntrain.lr = 0.1\n");
  CHECK_NOTHROW(cfg.check_section("decode.", {"k", "strategy"}));
  CHECK_NOTHROW(cfg.check_section("other.", {"x"}));  // no such keys: fine

  cfg.set("decode.K", "10");  // case matters
  CHECK_THROWS_AS(cfg.check_section("decode.", {"k", "strategy"}), value_error);
  CHECK_THROWS_WITH_AS(cfg.check_section("decode.", {"k", "strategy"}),
                       doctest::Contains("decode.K"), value_error);
  // A key that merely starts with a known name is still unknown.
  Config prefixy = Config::from_string("decode.kk = 1\n");
  CHECK_THROWS_AS(prefixy.check_section("decode.", {"k"}), value_error);
}

TEST_CASE("config set_double survives parse round-trips exactly") {
  Config cfg;
  for (double v : {1e-9, 0.1, 3.0, -2.5e300, 0.0}) {
    cfg.set_double("x", v);
    Config again = Config::from_string(cfg.to_string());
    CHECK(again.get_double("x") == v);
  }
}
