#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mdlm/checkpoint.hpp"
#include "mdlm/intervene.hpp"
#include "mdlm/rng.hpp"
#include "mdlm/tasks.hpp"
#include "mdlm/vocab.hpp"

using namespace mdlm;

namespace {

PredictorParams random_model(const Vocabulary& v, uint64_t seed) {
  PredictorConfig cfg;
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.num_blocks = 1;
  cfg.mlp_hidden = 32;
  cfg.max_positions = 64;
  cfg.output_support_size = v.support_size();
  Rng rng(seed);
  return PredictorParams::init(cfg, rng);
}

std::multiset<int> id_multiset(const std::vector<int>& ids) {
  return std::multiset<int>(ids.begin(), ids.end());
}

}  // namespace

TEST_SUITE_BEGIN("intervene");

TEST_CASE("default schedule has ten intervention times") {
  const auto times = default_intervention_times();
  CHECK(times.size() == 10);
  CHECK(times.front() == doctest::Approx(0.95));
  CHECK(times.back() == doctest::Approx(0.50));
  for (double t : times) {
    CHECK(t >= 0.5);
    CHECK(t < 1.0);
  }
}

TEST_CASE("eligible_boundaries: fully masked canvas has none") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  const MaskedCanvas c = MaskedCanvas::all_masked(8, v.mask_id());
  CHECK(eligible_boundaries(c).empty());
}

TEST_CASE("eligible_boundaries: run to the canvas end has none") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcd");
  const int a = v.id_of("a");
  // no terminating MASK inside the canvas
  const MaskedCanvas c = MaskedCanvas::from_ids({a, a, a, a, a}, v.mask_id());
  CHECK(eligible_boundaries(c).empty());
}

TEST_CASE("eligible_boundaries: interior positions of a terminated run") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcdzw");
  const auto id = [&](const char* s) { return v.id_of(s); };
  // (Z, A, B, C, D, MASK, W): run [0,4] terminated at 5
  const MaskedCanvas c = MaskedCanvas::from_ids(
      {id("z"), id("a"), id("b"), id("c"), id("d"), v.mask_id(), id("w")}, v.mask_id());
  const auto bs = eligible_boundaries(c);
  CHECK(bs == std::vector<int>{1, 2, 3});
}

TEST_CASE("apply_shift reproduces the one-position rotation") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcdzw");
  const auto id = [&](const char* s) { return v.id_of(s); };
  // Before: ... A B C D <MASK> ...
  MaskedCanvas c = MaskedCanvas::from_ids(
      {id("z"), id("a"), id("b"), id("c"), id("d"), v.mask_id(), id("w")}, v.mask_id());
  const auto before = id_multiset(c.ids);
  apply_shift(c, 1);  // boundary at A
  // After: ... A <MASK> B C D ...
  CHECK(c.ids == std::vector<int>{id("z"), id("a"), v.mask_id(), id("b"), id("c"), id("d"),
                                  id("w")});
  CHECK_FALSE(c.is_committed(2));
  CHECK(c.is_committed(3));
  CHECK(id_multiset(c.ids) == before);  // token identities preserved
  CHECK(c.masked_count() == 1);
}

TEST_CASE("apply_shift rejects ineligible boundaries") {
  const Vocabulary v = Vocabulary::from_corpus_text("ab");
  const int a = v.id_of("a");
  MaskedCanvas c = MaskedCanvas::from_ids({a, a, v.mask_id()}, v.mask_id());
  CHECK_THROWS_AS(apply_shift(c, 0), std::invalid_argument);   // no left neighbor
  CHECK_THROWS_AS(apply_shift(c, 1), std::invalid_argument);   // i+1 is MASK
  CHECK_THROWS_AS(apply_shift(c, 5), std::invalid_argument);   // out of range
}

TEST_CASE("simultaneous shifts in distinct runs commute") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcdefgh");
  const auto id = [&](const char* s) { return v.id_of(s); };
  const std::vector<int> base = {id("a"), id("b"), id("c"), id("d"), v.mask_id(),
                                 id("e"), id("f"), id("g"), id("h"), v.mask_id()};
  MaskedCanvas c1 = MaskedCanvas::from_ids(base, v.mask_id());
  MaskedCanvas c2 = MaskedCanvas::from_ids(base, v.mask_id());
  // boundary 1 lives in run [0,3], boundary 6 in run [5,8]: disjoint windows
  apply_shift(c1, 1);
  apply_shift(c1, 6);
  apply_shift(c2, 6);
  apply_shift(c2, 1);
  CHECK(c1.ids == c2.ids);
  CHECK(c1.committed == c2.committed);
}

TEST_CASE("intervened_decode: K = 0 is bit-identical to plain decode") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcd");
  const PredictorParams params = random_model(v, 51);
  DecodeConfig dcfg;
  dcfg.length = 20;
  dcfg.steps = 10;
  dcfg.seed = 3;
  dcfg.temperature = 1.0;  // sampling path must not consume intervention rng
  InterventionConfig icfg;
  icfg.k = 0;
  icfg.seed = 99;

  const auto plain = decode(params, v, v.encode("ab"), dcfg);
  const auto iv = intervened_decode(params, v, v.encode("ab"), dcfg, icfg);
  CHECK(plain.text == iv.text);
  CHECK(plain.trace.final_canvas == iv.trace.final_canvas);
  REQUIRE(plain.trace.steps.size() == iv.trace.steps.size());
  for (size_t k = 0; k < plain.trace.steps.size(); ++k) {
    CHECK(plain.trace.steps[k].ids == iv.trace.steps[k].ids);
  }
}

TEST_CASE("intervened_decode: shift events bounded by 10K; multisets preserved") {
  const Vocabulary v = Vocabulary::from_corpus_text("abcdef");
  const PredictorParams params = random_model(v, 52);
  DecodeConfig dcfg;
  dcfg.length = 32;
  dcfg.steps = 16;
  dcfg.seed = 5;
  InterventionConfig icfg;
  icfg.k = 2;
  icfg.seed = 6;

  const auto res = intervened_decode(params, v, v.encode("abc"), dcfg, icfg);
  size_t total_shifts = 0;
  for (const auto& snap : res.trace.steps) {
    // every shift preserves the token multiset: post_merge + shifts = end ids
    CHECK(id_multiset(snap.ids) == id_multiset(snap.post_merge_ids));
    total_shifts += snap.shifts.size();
  }
  CHECK(total_shifts <= 10 * static_cast<size_t>(icfg.k));
  CHECK(total_shifts > 0);  // eligibility is plentiful at this size
}

TEST_CASE("robustness_sweep: position-independent predictor gives r = 0") {
  std::string all;
  for (const auto& ex : generate_suite("copy", 6, 11)) all += ex.prompt;
  const Vocabulary v = Vocabulary::from_corpus_text(all);
  PredictorConfig cfg;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.num_blocks = 1;
  cfg.mlp_hidden = 16;
  cfg.max_positions = 96;
  cfg.output_support_size = v.support_size();
  Checkpoint ckpt;
  ckpt.vocab = v;
  ckpt.params.config = cfg;
  ckpt.params.data.assign(ParamLayout(cfg).total, 0.0);  // constant outputs everywhere

  DecodeConfig dcfg;
  dcfg.length = 16;
  dcfg.steps = 8;
  InterventionConfig icfg;
  icfg.seed = 4;

  const auto sweep = robustness_sweep({NamedCheckpoint{"scripted", &ckpt, dcfg}}, "copy", 6,
                                      {0, 2, 4, 8}, icfg, 11);
  CHECK(sweep.r_by_model.at("scripted") == 0.0);
  // K = 0 row equals the un-intervened score
  double metric_k0 = -1.0;
  for (const auto& row : sweep.rows) {
    if (row.k == 0) metric_k0 = row.metric;
  }
  const auto suite = generate_suite("copy", 6, 11);
  double base = 0.0;
  for (const auto& ex : suite) {
    const auto out = decode(ckpt.params, v, v.encode(ex.prompt), dcfg);
    base += edit_similarity(out.text, ex.reference);
  }
  base /= 6.0;
  CHECK(metric_k0 == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("sweep CSV: header and one row per (model, K)") {
  std::string all;
  for (const auto& ex : generate_suite("copy", 4, 11)) all += ex.prompt;
  const Vocabulary v = Vocabulary::from_corpus_text(all);
  PredictorConfig cfg;
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.num_blocks = 1;
  cfg.mlp_hidden = 16;
  cfg.max_positions = 96;
  cfg.output_support_size = v.support_size();
  Checkpoint ckpt;
  ckpt.vocab = v;
  ckpt.params.config = cfg;
  ckpt.params.data.assign(ParamLayout(cfg).total, 0.0);

  DecodeConfig dcfg;
  dcfg.length = 12;
  dcfg.steps = 6;
  InterventionConfig icfg;
  const auto sweep =
      robustness_sweep({NamedCheckpoint{"m", &ckpt, dcfg}}, "copy", 4, {0, 2}, icfg, 3);

  namespace fs = std::filesystem;
  const std::string path = fs::temp_directory_path() / "mdlm_sweep_test.csv";
  write_sweep_csv(sweep, path);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "model,task,K,seed,metric,r");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());
}

TEST_CASE("pearson: exact on a simple line, zero on flat input") {
  CHECK(pearson({0, 1, 2, 3}, {3, 2, 1, 0}) == doctest::Approx(-1.0));
  CHECK(pearson({0, 1, 2, 3}, {5, 5, 5, 5}) == 0.0);
}

TEST_SUITE_END();
