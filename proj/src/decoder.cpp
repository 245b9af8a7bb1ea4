// SPDX-License-Identifier: Apache-2.0
#include "mdlm/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mdlm/ctc.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/rng.hpp"

namespace mdlm {

void DecodeConfig::validate() const {
  if (length <= 0 || steps <= 0 || steps > length) {
    throw ConfigError("decode config: need 1 <= steps <= length");
  }
  if (temperature < 0.0) {
    throw ConfigError("decode config: temperature must be >= 0");
  }
}

std::vector<MergeEvent> merge_duplicates(MaskedCanvas& canvas, int slack_id) {
  std::vector<MergeEvent> events;
  const std::vector<int> snap = canvas.ids;  // duplicate detection on the pre-merge state
  const size_t L = snap.size();
  size_t i = 0;
  while (i < L) {
    const int id = snap[i];
    if (id == canvas.mask || id == slack_id || !canvas.is_committed(i)) {
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < L && snap[j] == id && canvas.is_committed(j)) ++j;
    for (size_t k = i + 1; k < j; ++k) {
      events.push_back(MergeEvent{static_cast<int>(k), snap[k]});
      canvas.ids[k] = slack_id;  // stays committed
    }
    i = j;
  }
  return events;
}

std::vector<MergeEvent> merge_duplicates_sequential(MaskedCanvas& canvas, int slack_id) {
  std::vector<MergeEvent> events;
  for (size_t i = 1; i < canvas.ids.size(); ++i) {
    const int prev = canvas.ids[i - 1];
    const int cur = canvas.ids[i];
    if (prev == canvas.mask || cur == canvas.mask) continue;
    if (prev == slack_id || cur == slack_id) continue;
    if (!canvas.is_committed(i - 1) || !canvas.is_committed(i)) continue;
    if (prev == cur) {
      events.push_back(MergeEvent{static_cast<int>(i), cur});
      canvas.ids[i] = slack_id;
    }
  }
  return events;
}

CleanSequence finalize_canvas(const MaskedCanvas& canvas, const Vocabulary& vocab) {
  for (size_t i = 0; i < canvas.length(); ++i) {
    if (canvas.is_masked(i)) {
      throw NumericError("finalize: residual MASK at position " + std::to_string(i) +
                         " (decode loop bug)");
    }
  }
  const std::vector<int> collapsed = ctc::collapse(canvas.ids, vocab.slack_id());
  CleanSequence out;
  for (int id : collapsed) {
    if (id == vocab.eos_id()) break;
    out.ids.push_back(id);
  }
  return out;
}

DecodeResult decode(const PredictorParams& params, const Vocabulary& vocab,
                    const CleanSequence& prompt, const DecodeConfig& cfg,
                    const StepHook& post_step) {
  cfg.validate();
  const int L = cfg.length;
  const int N = cfg.steps;
  const int support = vocab.support_size();
  if (params.config.output_support_size != support) {
    throw ConfigError("decode: checkpoint support does not match vocabulary");
  }

  MaskedCanvas canvas = MaskedCanvas::all_masked(static_cast<size_t>(L), vocab.mask_id());
  if (cfg.fix_final_eos) {
    canvas.ids[L - 1] = vocab.eos_id();
    canvas.committed[L - 1] = 1;
  }

  Rng rng(cfg.seed);
  DecodeResult result;
  result.trace.steps.reserve(N);
  ForwardCache cache;

  for (int k = 1; k <= N; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const double t_k = 1.0 - static_cast<double>(k) / N;

    const Eigen::MatrixXd logp = predictor_forward(params, prompt.ids, canvas, cache);

    // select a token and confidence for every masked position
    std::vector<int> selected(L, -1);
    std::vector<double> confidence(L, 0.0);
    for (int i = 0; i < L; ++i) {
      if (!canvas.is_masked(static_cast<size_t>(i))) continue;
      int sel;
      if (cfg.temperature == 0.0) {
        Eigen::Index arg;
        logp.row(i).maxCoeff(&arg);
        sel = static_cast<int>(arg);
      } else {
        Eigen::ArrayXd w = (logp.row(i).array() / cfg.temperature).exp();
        w /= w.sum();
        const double u = rng.unit();
        double acc = 0.0;
        sel = support - 1;
        for (int c = 0; c < support; ++c) {
          acc += w(c);
          if (u < acc) {
            sel = c;
            break;
          }
        }
      }
      selected[i] = sel;
      confidence[i] = std::exp(logp(i, sel));
    }

    // commit the most confident predictions up to the schedule quota
    const long quota = static_cast<long>(
        std::ceil(static_cast<double>(k) * static_cast<double>(L) / N));
    long need = quota - static_cast<long>(canvas.committed_count());
    if (k == N) need = static_cast<long>(canvas.masked_count());
    if (need > 0) {
      std::vector<int> ranked;
      for (int i = 0; i < L; ++i) {
        if (canvas.is_masked(static_cast<size_t>(i))) ranked.push_back(i);
      }
      std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
        if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
        return a < b;  // tie: lower position index wins
      });
      const size_t n_commit = std::min<size_t>(ranked.size(), static_cast<size_t>(need));
      for (size_t r = 0; r < n_commit; ++r) {
        const int i = ranked[r];
        canvas.ids[i] = vocab.id_of_support(selected[i]);
        canvas.committed[i] = 1;
      }
    }

    StepSnapshot snap;
    snap.step = k;
    snap.t_k = t_k;
    snap.confidence = std::move(confidence);
    snap.pre_merge_ids = canvas.ids;
    if (cfg.merge_enabled) {
      snap.merges = cfg.merge_sequential ? merge_duplicates_sequential(canvas, vocab.slack_id())
                                         : merge_duplicates(canvas, vocab.slack_id());
    }
    snap.post_merge_ids = canvas.ids;

    if (post_step) {
      post_step(canvas, k, t_k, snap);
    }

    snap.ids = canvas.ids;
    snap.committed = canvas.committed;
    snap.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    result.trace.steps.push_back(std::move(snap));
  }

  result.trace.final_canvas = canvas.ids;
  result.sequence = finalize_canvas(canvas, vocab);
  result.text = vocab.decode(result.sequence.ids);
  return result;
}

void write_trace_jsonl(const DecodeTrace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("trace: cannot open for write: " + path);
  for (const auto& s : trace.steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["t"] = s.t_k;
    j["pre_merge_ids"] = s.pre_merge_ids;
    j["post_merge_ids"] = s.post_merge_ids;
    j["ids"] = s.ids;
    j["committed"] = s.committed;
    j["confidence"] = s.confidence;
    auto merges = nlohmann::json::array();
    for (const auto& m : s.merges) {
      merges.push_back({{"position", m.position}, {"original_id", m.original_id}});
    }
    j["merges"] = merges;
    auto shifts = nlohmann::json::array();
    for (const auto& sh : s.shifts) {
      shifts.push_back({{"boundary", sh.boundary}, {"mask_source", sh.mask_source}});
    }
    j["shifts"] = shifts;
    j["shift_shortfall"] = s.shift_shortfall;
    j["wall_ms"] = s.wall_ms;
    f << j.dump() << "\n";
  }
}

}  // namespace mdlm
