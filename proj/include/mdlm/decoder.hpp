// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdlm/predictor.hpp"
#include "mdlm/sequence.hpp"
#include "mdlm/vocab.hpp"

namespace mdlm {

struct DecodeConfig {
  int length = 64;            // canvas positions L
  int steps = 32;             // diffusion steps N, 1 <= N <= L
  bool fix_final_eos = true;  // pre-commit EOS at position L-1
  double temperature = 0.0;   // 0 = greedy argmax
  bool merge_enabled = true;
  bool merge_sequential = false;  // pairwise in-place variant, for comparison
  uint64_t seed = 0;

  void validate() const;
};

struct MergeEvent {
  int position;
  int original_id;
};

struct ShiftEvent {
  int boundary;     // unmasked position left of the rotated block
  int mask_source;  // canvas index the MASK was rotated in from
};

struct StepSnapshot {
  int step = 0;
  double t_k = 0.0;
  std::vector<int> pre_merge_ids;   // after commitment, before merge
  std::vector<int> post_merge_ids;  // after merge, before any intervention
  std::vector<int> ids;             // end of step
  std::vector<uint8_t> committed;
  std::vector<double> confidence;  // selected-token probability where evaluated, else 0
  std::vector<MergeEvent> merges;
  std::vector<ShiftEvent> shifts;
  int shift_shortfall = 0;  // requested minus applied boundaries this step
  double wall_ms = 0.0;
};

struct DecodeTrace {
  std::vector<StepSnapshot> steps;
  std::vector<int> final_canvas;
};

struct DecodeResult {
  std::string text;
  CleanSequence sequence;  // collapsed, EOS-truncated output
  DecodeTrace trace;
};

// Called after the commitment-and-merge phase of every step; interventions
// hook in here and record what they did on the snapshot.
using StepHook = std::function<void(MaskedCanvas&, int step, double t_k, StepSnapshot&)>;

// Reverse diffusion on an all-MASK canvas: predict every masked position in
// parallel, keep the highest-confidence predictions so the committed count
// reaches ceil(k*L/N), re-mask the rest, then convert adjacent committed
// duplicates to SLACK. Committed tokens are irreversible (merge-to-SLACK is
// the one exception).
DecodeResult decode(const PredictorParams& params, const Vocabulary& vocab,
                    const CleanSequence& prompt, const DecodeConfig& cfg,
                    const StepHook& post_step = nullptr);

// Snapshot rule: every position after the first of each maximal run of >= 2
// identical adjacent committed tokens (not MASK, not SLACK) becomes SLACK.
std::vector<MergeEvent> merge_duplicates(MaskedCanvas& canvas, int slack_id);

// In-place pairwise variant; collapses runs like (5,5,5) to (5,SLACK,5),
// which does not preserve the collapse image. Kept for comparison.
std::vector<MergeEvent> merge_duplicates_sequential(MaskedCanvas& canvas, int slack_id);

// Collapse the canvas, truncate at the first EOS (exclusive), decode to text.
// Throws NumericError if any MASK remains.
CleanSequence finalize_canvas(const MaskedCanvas& canvas, const Vocabulary& vocab);

void write_trace_jsonl(const DecodeTrace& trace, const std::string& path);

}  // namespace mdlm
