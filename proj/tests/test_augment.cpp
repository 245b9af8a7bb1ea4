#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdlm/augment.hpp"
#include "mdlm/ctc.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/rng.hpp"

using namespace mdlm;

namespace {

std::vector<int> strip_slack(const std::vector<int>& ids, int slack) {
  std::vector<int> out;
  for (int id : ids) {
    if (id != slack) out.push_back(id);
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("augment");

TEST_CASE("insert_slack: s = 0 is the identity") {
  const Vocabulary v = Vocabulary::from_corpus_text("abc");
  const CleanSequence r0 = v.encode("abcabc");
  Rng rng(1);
  const auto out = insert_slack(r0, 0.0, AugmentConfig{}, v.slack_id(), rng);
  CHECK(out == r0.ids);
}

TEST_CASE("insert_slack: exact count and deletion round trip") {
  const Vocabulary v = Vocabulary::from_corpus_text("abc");
  const CleanSequence r0 = v.encode("abcabcabca");  // L = 10
  Rng rng(2);
  const auto out = insert_slack(r0, 0.5, AugmentConfig{}, v.slack_id(), rng);
  CHECK(out.size() == 15);
  CHECK(std::count(out.begin(), out.end(), v.slack_id()) == 5);
  CHECK(strip_slack(out, v.slack_id()) == r0.ids);
}

TEST_CASE("insert_slack: ratio above s_max rejected") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  const CleanSequence r0 = v.encode("ab");
  Rng rng(3);
  CHECK_THROWS_AS(insert_slack(r0, 0.6, AugmentConfig{}, v.slack_id(), rng),
                  std::invalid_argument);
}

TEST_CASE("pad_and_convert: full sequence leaves no padding budget") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  AugmentConfig cfg;
  cfg.batch_length = 8;
  Rng rng(4);
  const CleanSequence r0 = v.encode("abababa");  // length 7 = batch_length - 1
  const auto ex = pad_and_convert(CleanSequence{}, r0, r0.ids, cfg, v, 0.01, rng);
  CHECK(ex.aug_target.size() == 8);
  CHECK(ex.aug_target.back() == v.eos_id());
  CHECK(std::count(ex.aug_target.begin(), ex.aug_target.end(), v.slack_id()) == 0);
}

TEST_CASE("pad_and_convert: pad_convert_max = 0 is plain EOS padding") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  AugmentConfig cfg;
  cfg.batch_length = 12;
  cfg.pad_convert_max = 0.0;
  Rng rng(5);
  const CleanSequence r0 = v.encode("abab");
  const auto ex = pad_and_convert(CleanSequence{}, r0, r0.ids, cfg, v, 0.01, rng);
  std::vector<int> want = r0.ids;
  want.insert(want.end(), 8, v.eos_id());
  CHECK(ex.aug_target == want);
}

TEST_CASE("pad_and_convert: conversion cap and terminal EOS over 1000 seeded runs") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  AugmentConfig cfg;
  cfg.batch_length = 31;  // L=10 content + 1 terminal EOS + 20 padding
  cfg.pad_convert_max = 0.25;
  const CleanSequence r0 = v.encode("ababababab");  // L = 10, cap = 2
  Rng rng(6);
  bool saw_conversion = false;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto ex = pad_and_convert(CleanSequence{}, r0, r0.ids, cfg, v, 0.01, rng);
    REQUIRE(ex.aug_target.size() == 31);
    const long n_slack =
        std::count(ex.aug_target.begin(), ex.aug_target.end(), v.slack_id());
    CHECK(n_slack <= 2);
    if (n_slack > 0) saw_conversion = true;

    // stripping SLACK and trailing padding EOS recovers r0 + terminal EOS
    std::vector<int> stripped = strip_slack(ex.aug_target, v.slack_id());
    while (stripped.size() > r0.length() + 1 && stripped.back() == v.eos_id()) {
      stripped.pop_back();
    }
    std::vector<int> want = r0.ids;
    want.push_back(v.eos_id());
    CHECK(stripped == want);

    // relocated SLACK stays before the terminal EOS
    const auto first_eos =
        std::find(ex.aug_target.begin(), ex.aug_target.end(), v.eos_id());
    for (auto it = first_eos; it != ex.aug_target.end(); ++it) {
      CHECK(*it == v.eos_id());  // nothing but EOS after the first EOS
    }
  }
  CHECK(saw_conversion);
}

TEST_CASE("pad_and_convert: overlong sequences rejected") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  AugmentConfig cfg;
  cfg.batch_length = 4;
  Rng rng(7);
  const CleanSequence r0 = v.encode("abab");
  CHECK_THROWS_AS(pad_and_convert(CleanSequence{}, r0, r0.ids, cfg, v, 0.01, rng),
                  std::invalid_argument);
}

TEST_CASE("ce_weight marks exactly the SLACK positions") {
  const Vocabulary v = Vocabulary::from_corpus_text("abc");
  AugmentConfig cfg;
  cfg.batch_length = 24;
  Rng rng(8);
  const CleanSequence r0 = v.encode("abcabc");
  const auto aug = insert_slack(r0, 0.5, cfg, v.slack_id(), rng);
  const auto ex = pad_and_convert(CleanSequence{}, r0, aug, cfg, v, 0.01, rng);
  for (size_t i = 0; i < ex.aug_target.size(); ++i) {
    if (ex.aug_target[i] == v.slack_id()) {
      CHECK(ex.ce_weight[i] == 0.01);
    } else {
      CHECK(ex.ce_weight[i] == 1.0);
    }
  }
}

TEST_CASE("slack count distribution: mean near s_max * L / 2") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  AugmentConfig cfg;
  cfg.s_max = 0.5;
  const size_t L = 100;  // large enough that the floor() bias stays below 5%
  std::vector<int> ids(L, 0);
  const CleanSequence r0{std::vector<int>(ids)};
  Rng rng(9);
  double total = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    const double s = rng.uniform(0.0, cfg.s_max);
    const auto out = insert_slack(r0, s, cfg, v.slack_id(), rng);
    total += static_cast<double>(out.size() - L);
  }
  const double mean = total / trials;
  const double expected = cfg.s_max * static_cast<double>(L) / 2.0;  // = 25
  CHECK(std::abs(mean - expected) / expected < 0.05);
}

TEST_CASE("prepare_batch: t = 1 masks every response position, prompts untouched") {
  const Vocabulary v = Vocabulary::from_corpus_text("pq: abc");
  AugmentConfig cfg;
  cfg.batch_length = 16;
  Rng rng(10);
  std::vector<CorpusRecord> records = {
      {v.encode("pq: "), v.encode("abc")},
      {v.encode("pq: "), v.encode("cba")},
  };
  const auto batch = prepare_batch(records, 1.0, cfg, v, 0.01, rng);
  REQUIRE(batch.size() == 2);
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i].canvas.masked_count() == batch[i].canvas.length());
    // prompts live outside the canvas and are passed through verbatim
    CHECK(batch[i].example.prompt == records[i].first);
    for (int id : batch[i].example.prompt.ids) CHECK(id != v.mask_id());
  }
}

TEST_CASE("prepare_batch: same seed gives identical batches") {
  const Vocabulary v = Vocabulary::from_corpus_text("xy: ab");
  AugmentConfig cfg;
  cfg.batch_length = 16;
  std::vector<CorpusRecord> records = {
      {v.encode("xy: "), v.encode("abxy")},
      {v.encode("xy: "), v.encode("yxba")},
  };
  Rng r1(42), r2(42);
  const auto b1 = prepare_batch(records, 0.5, cfg, v, 0.01, r1);
  const auto b2 = prepare_batch(records, 0.5, cfg, v, 0.01, r2);
  REQUIRE(b1.size() == b2.size());
  for (size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].example.aug_target == b2[i].example.aug_target);
    CHECK(b1[i].canvas.ids == b2[i].canvas.ids);
  }
}

TEST_CASE("aug_target invariant: SLACK deletion recovers the clean target") {
  const Vocabulary v = Vocabulary::from_corpus_text("abc");
  AugmentConfig cfg;
  cfg.batch_length = 32;
  Rng rng(11);
  // targets with adjacent repeats included: deletion (not collapse) must
  // recover them token for token
  for (const char* text : {"aabbcc", "abc", "aaaa", "cabba"}) {
    const CleanSequence r0 = v.encode(text);
    const double s = rng.uniform(0.0, cfg.s_max);
    const auto aug = insert_slack(r0, s, cfg, v.slack_id(), rng);
    CHECK(strip_slack(aug, v.slack_id()) == r0.ids);
  }
}

TEST_CASE("corpus loading: TAB records and tokenization") {
  namespace fs = std::filesystem;
  const std::string path = fs::temp_directory_path() / "mdlm_corpus_test.tsv";
  {
    std::ofstream f(path);
    f << "copy: ab\tab\n";
    f << "copy: ba\tba\n";
  }
  const auto records = load_corpus_text(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].first == "copy: ab");
  CHECK(records[0].second == "ab");
  const Vocabulary v = Vocabulary::from_corpus_text("copy: ab\tba");
  const auto toks = tokenize_corpus(records, v);
  CHECK(toks[0].second == v.encode("ab"));
  std::remove(path.c_str());
}

TEST_SUITE_END();
