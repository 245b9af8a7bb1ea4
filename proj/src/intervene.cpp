// SPDX-License-Identifier: Apache-2.0
#include "mdlm/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "mdlm/errors.hpp"
#include "mdlm/rng.hpp"
#include "mdlm/tasks.hpp"

namespace mdlm {

std::vector<double> default_intervention_times() {
  std::vector<double> times;
  for (int i = 0; i < 10; ++i) {
    times.push_back(static_cast<double>(19 - i) / 20.0);  // 0.95, 0.90, ..., 0.50
  }
  return times;
}

namespace {

struct Run {
  int begin;  // first unmasked index
  int end;    // last unmasked index; canvas[end + 1] is the terminating MASK
};

// Maximal unmasked runs that are terminated by a MASK inside the canvas and
// long enough to contain a boundary (>= 3 positions).
std::vector<Run> eligible_runs(const MaskedCanvas& canvas) {
  std::vector<Run> runs;
  const int L = static_cast<int>(canvas.length());
  int i = 0;
  while (i < L) {
    if (canvas.is_masked(static_cast<size_t>(i))) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < L && !canvas.is_masked(static_cast<size_t>(j + 1))) ++j;
    const bool terminated = j + 1 < L;  // run does not extend to the canvas end
    if (terminated && j - i >= 2) {
      runs.push_back(Run{i, j});
    }
    i = j + 1;
  }
  return runs;
}

}  // namespace

std::vector<int> eligible_boundaries(const MaskedCanvas& canvas) {
  std::vector<int> out;
  for (const Run& r : eligible_runs(canvas)) {
    for (int i = r.begin + 1; i <= r.end - 1; ++i) {
      out.push_back(i);
    }
  }
  return out;
}

void apply_shift(MaskedCanvas& canvas, int boundary) {
  const int L = static_cast<int>(canvas.length());
  const auto eligible = eligible_boundaries(canvas);
  if (std::find(eligible.begin(), eligible.end(), boundary) == eligible.end()) {
    throw std::invalid_argument("apply_shift: boundary " + std::to_string(boundary) +
                                " is not eligible");
  }
  int mask_pos = boundary + 1;
  while (mask_pos < L && !canvas.is_masked(static_cast<size_t>(mask_pos))) ++mask_pos;

  // rotate window [boundary+1, mask_pos] right by one
  for (int i = mask_pos; i > boundary + 1; --i) {
    canvas.ids[i] = canvas.ids[i - 1];
    canvas.committed[i] = canvas.committed[i - 1];
  }
  canvas.ids[boundary + 1] = canvas.mask;
  canvas.committed[boundary + 1] = 0;
}

DecodeResult intervened_decode(const PredictorParams& params, const Vocabulary& vocab,
                               const CleanSequence& prompt, const DecodeConfig& dcfg,
                               const InterventionConfig& icfg) {
  std::vector<double> pending = icfg.times;
  std::sort(pending.begin(), pending.end(), std::greater<double>());
  size_t next_time = 0;
  Rng rng(icfg.seed);

  StepHook hook = [&](MaskedCanvas& canvas, int /*step*/, double t_k, StepSnapshot& snap) {
    while (next_time < pending.size() && t_k <= pending[next_time]) {
      ++next_time;  // this step crosses the scheduled time: one intervention round
      if (icfg.k <= 0) continue;

      auto runs = eligible_runs(canvas);
      const int n_apply = std::min<int>(icfg.k, static_cast<int>(runs.size()));
      snap.shift_shortfall += icfg.k - n_apply;

      // uniform runs first, then a uniform boundary within each chosen run;
      // one boundary per run keeps the shifted windows disjoint
      shuffle(runs, rng);
      std::vector<int> boundaries;
      for (int r = 0; r < n_apply; ++r) {
        const Run& run = runs[r];
        const int span = run.end - 1 - (run.begin + 1) + 1;
        boundaries.push_back(run.begin + 1 + static_cast<int>(rng.below(span)));
      }
      std::sort(boundaries.begin(), boundaries.end());
      for (int b : boundaries) {
        int mask_pos = b + 1;
        while (!canvas.is_masked(static_cast<size_t>(mask_pos))) ++mask_pos;
        apply_shift(canvas, b);
        snap.shifts.push_back(ShiftEvent{b, mask_pos});
      }
    }
  };

  return decode(params, vocab, prompt, dcfg, hook);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw std::invalid_argument("pearson: need equal, non-empty samples");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // flat metric: no correlation
  return sxy / std::sqrt(sxx * syy);
}

SweepResult robustness_sweep(const std::vector<NamedCheckpoint>& models,
                             const std::string& task, int n_examples,
                             const std::vector<int>& k_values,
                             const InterventionConfig& base_icfg, uint64_t suite_seed) {
  const auto suite = generate_suite(task, n_examples, suite_seed);
  SweepResult sweep;

  int n_threads = static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, 8);

  for (const auto& model : models) {
    const Vocabulary& vocab = model.ckpt->vocab;
    std::vector<double> ks, metrics;
    for (int k : k_values) {
      // cells are independent seeded decodes; scores reduce in example order
      std::vector<double> scores(suite.size(), 0.0);
      auto worker = [&](size_t begin, size_t end) {
        for (size_t e = begin; e < end; ++e) {
          InterventionConfig icfg = base_icfg;
          icfg.k = k;
          icfg.seed = base_icfg.seed ^ (static_cast<uint64_t>(k) << 32) ^ e;
          const auto out =
              intervened_decode(model.ckpt->params, vocab, vocab.encode(suite[e].prompt),
                                model.decode, icfg);
          scores[e] = edit_similarity(out.text, suite[e].reference);
        }
      };
      if (n_threads == 1 || suite.size() < 2) {
        worker(0, suite.size());
      } else {
        std::vector<std::thread> pool;
        const size_t chunk = (suite.size() + n_threads - 1) / n_threads;
        for (int w = 0; w < n_threads; ++w) {
          const size_t begin = w * chunk;
          const size_t end = std::min(suite.size(), begin + chunk);
          if (begin >= end) break;
          pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
      }
      double sum = 0.0;
      for (double s : scores) sum += s;
      const double mean = sum / static_cast<double>(suite.size());
      ks.push_back(static_cast<double>(k));
      metrics.push_back(mean);
      sweep.rows.push_back(SweepRow{model.name, task, k, base_icfg.seed, mean, 0.0});
    }
    const double r = pearson(ks, metrics);
    for (auto& row : sweep.rows) {
      if (row.model == model.name) row.pearson_r = r;
    }
    sweep.r_by_model[model.name] = r;
  }
  return sweep;
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("sweep: cannot open for write: " + path);
  f << "model,task,K,seed,metric,r\n";
  f.precision(10);
  for (const auto& row : sweep.rows) {
    f << row.model << ',' << row.task << ',' << row.k << ',' << row.seed << ','
      << row.metric << ',' << row.pearson_r << "\n";
  }
}

}  // namespace mdlm
