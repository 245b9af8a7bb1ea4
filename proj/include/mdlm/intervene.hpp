// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdlm/checkpoint.hpp"
#include "mdlm/decoder.hpp"
#include "mdlm/sequence.hpp"

namespace mdlm {

// Ten scheduled times: every 0.05 diffusion time units for t >= 0.5.
std::vector<double> default_intervention_times();

struct InterventionConfig {
  int k = 0;  // shift boundaries per intervention step
  std::vector<double> times = default_intervention_times();
  uint64_t seed = 0;
};

// Positions i whose neighbors i-1, i, i+1 are all unmasked and whose run to
// the right is terminated by a MASK inside the canvas. One boundary per
// maximal unmasked run is sampled later; this returns every candidate.
std::vector<int> eligible_boundaries(const MaskedCanvas& canvas);

// Rotates the window (boundary, mask] right by one: the terminating MASK
// moves to boundary+1 and the unmasked block shifts right one index. Token
// identities, commit flags and canvas length are preserved. Throws
// std::invalid_argument on an ineligible boundary.
void apply_shift(MaskedCanvas& canvas, int boundary);

// decode() with shift interventions fired after the commitment-and-merge
// phase of the first step crossing each scheduled time: min(K, eligible runs)
// boundaries, at most one per run, all taken from the same snapshot.
DecodeResult intervened_decode(const PredictorParams& params, const Vocabulary& vocab,
                               const CleanSequence& prompt, const DecodeConfig& dcfg,
                               const InterventionConfig& icfg);

struct SweepRow {
  std::string model;
  std::string task;
  int k = 0;
  uint64_t seed = 0;
  double metric = 0.0;     // mean normalized edit similarity at this K
  double pearson_r = 0.0;  // r between K and metric for this model/task
};

struct NamedCheckpoint {
  std::string name;
  const Checkpoint* ckpt = nullptr;
  DecodeConfig decode;  // per-model regime (a CE baseline decodes without merge)
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::map<std::string, double> r_by_model;
};

// For each model and K: intervened generation over the task suite, scored by
// normalized edit similarity against the references; Pearson r between K and
// the per-K mean metric (r = 0 when the metric has zero variance).
SweepResult robustness_sweep(const std::vector<NamedCheckpoint>& models,
                             const std::string& task, int n_examples,
                             const std::vector<int>& k_values,
                             const InterventionConfig& base_icfg, uint64_t suite_seed);

void write_sweep_csv(const SweepResult& sweep, const std::string& path);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mdlm
