#include <doctest.h>

#include <set>

#include "mdlm/config.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/tasks.hpp"
#include "mdlm/vocab.hpp"

using namespace mdlm;

TEST_SUITE_BEGIN("tasks_config");

TEST_CASE("suite definitions: copy and reverse") {
  const auto copy = generate_suite("copy", 20, 1);
  for (const auto& ex : copy) {
    REQUIRE(ex.prompt.rfind("copy: ", 0) == 0);
    CHECK(ex.prompt.substr(6) == ex.reference);
  }
  const auto rev = generate_suite("reverse", 20, 1);
  for (const auto& ex : rev) {
    REQUIRE(ex.prompt.rfind("rev: ", 0) == 0);
    const std::string s = ex.prompt.substr(5);
    CHECK(std::string(s.rbegin(), s.rend()) == ex.reference);
  }
}

TEST_CASE("suites are deterministic in (name, n, seed)") {
  for (const auto& name : task_names()) {
    const auto a = generate_suite(name, 12, 7);
    const auto b = generate_suite(name, 12, 7);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].prompt == b[i].prompt);
      CHECK(a[i].reference == b[i].reference);
    }
  }
  CHECK_THROWS_AS(generate_suite("nope", 3, 1), ConfigError);
}

TEST_CASE("digit suite: at least half the references carry adjacent repeats") {
  const auto suite = generate_suite("digits", 100, 3);
  int with_repeat = 0;
  for (const auto& ex : suite) {
    if (has_adjacent_repeat(ex.reference)) ++with_repeat;
  }
  CHECK(with_repeat >= 50);
  CHECK(with_repeat < 100);  // repeat-free references exist for the contrast
}

TEST_CASE("suites tokenize under a vocabulary built from their own text") {
  for (const auto& name : task_names()) {
    const auto suite = generate_suite(name, 30, 5);
    std::string all;
    for (const auto& ex : suite) {
      all += ex.prompt;
      all += ex.reference;
    }
    const Vocabulary v = Vocabulary::from_corpus_text(all);
    for (const auto& ex : suite) {
      CHECK_NOTHROW(v.encode(ex.prompt));
      CHECK_NOTHROW(v.encode(ex.reference));
    }
  }
}

TEST_CASE("edit metrics") {
  CHECK(levenshtein("abc", "abc") == 0);
  CHECK(levenshtein("abc", "abd") == 1);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(edit_similarity("abc", "abc") == 1.0);
  CHECK(edit_similarity("", "") == 1.0);
  CHECK(exact_match("a", "a") == 1.0);
  CHECK(exact_match("a", "b") == 0.0);
}

TEST_CASE("repeat-drop detection") {
  CHECK(is_repeat_drop("50", "500"));
  CHECK(is_repeat_drop("80", "800"));
  CHECK_FALSE(is_repeat_drop("500", "500"));
  CHECK_FALSE(is_repeat_drop("12", "123"));  // dropped char is not a repeat
  CHECK(is_single_char_drop("12", "123"));
  CHECK_FALSE(is_single_char_drop("1", "123"));
}

TEST_CASE("run config: defaults, parsing, strict keys, path resolution") {
  const std::string text =
      "# comment\n"
      "vocab = vocab.txt\n"
      "corpus = data/corpus.tsv\n"
      "out_dir = /tmp/mdlm_out\n"
      "predictor.embed_dim = 64\n"
      "train.lambda_ctc = 0.1\n"
      "train.seed = 9\n"
      "augment.batch_length = 48\n"
      "decode.temperature = 0.5\n"
      "intervene.times = 0.95,0.9\n";
  const RunConfig cfg = parse_run_config_text(text, "/base");
  CHECK(cfg.vocab_path == "/base/vocab.txt");
  CHECK(cfg.corpus_path == "/base/data/corpus.tsv");
  CHECK(cfg.out_dir == "/tmp/mdlm_out");  // absolute stays put
  CHECK(cfg.predictor.embed_dim == 64);
  CHECK(cfg.predictor.num_heads == 4);  // untouched default
  CHECK(cfg.train.lambda_ctc == 0.1);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.augment.batch_length == 48);
  CHECK(cfg.decode.temperature == 0.5);
  REQUIRE(cfg.intervene.times.size() == 2);

  CHECK_THROWS_AS(parse_run_config_text("mystery = 1\n", ""), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("train.epochs == 3\n", ""), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("train.epochs = abc\n", ""), ConfigError);
}

TEST_CASE("run config: render/parse round trip") {
  RunConfig cfg;
  cfg.vocab_path = "/v";
  cfg.corpus_path = "/c";
  cfg.out_dir = "/o";
  cfg.train.lambda_ctc = 0.25;
  cfg.decode.steps = 16;
  cfg.intervene.k = 4;
  const RunConfig back = parse_run_config_text(render_run_config(cfg), "");
  CHECK(back.train.lambda_ctc == cfg.train.lambda_ctc);
  CHECK(back.decode.steps == cfg.decode.steps);
  CHECK(back.intervene.k == cfg.intervene.k);
  CHECK(back.intervene.times == cfg.intervene.times);
}

TEST_SUITE_END();
