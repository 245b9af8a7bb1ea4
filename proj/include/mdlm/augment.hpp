// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mdlm/rng.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/sequence.hpp"
#include "mdlm/vocab.hpp"

namespace mdlm {

struct AugmentConfig {
  double s_max = 0.5;            // maximum slack ratio, s ~ U[0, s_max]
  double pad_convert_max = 0.25; // max fraction of L converted from padding EOS
  int batch_length = 64;         // fixed response length for batching
};

// One training unit: prompt q_0, clean target r_0, slack-augmented padded
// target r~_0 of exactly batch_length tokens, and per-position CE weights
// (1.0 everywhere except w_slack at SLACK positions).
struct SlackAugmentedExample {
  CleanSequence prompt;
  CleanSequence clean_target;
  std::vector<int> aug_target;
  std::vector<double> ce_weight;
};

// Inserts floor(s * L) SLACK tokens at uniformly random slots (with
// replacement over the L + 1 slots, order preserving). Deleting SLACK from
// the result recovers r0 exactly. Throws on s outside [0, s_max].
std::vector<int> insert_slack(const CleanSequence& r0, double s, const AugmentConfig& cfg,
                              int slack_id, Rng& rng);

// Appends the supervised terminal EOS, pads to batch_length with supervised
// EOS, then converts a random number (at most floor(pad_convert_max * L)) of
// padding EOS into SLACK relocated to uniformly random interior positions
// before the terminal EOS. Throws if the sequence cannot fit.
SlackAugmentedExample pad_and_convert(CleanSequence prompt, CleanSequence r0,
                                      std::vector<int> aug, const AugmentConfig& cfg,
                                      const Vocabulary& vocab, double w_slack, Rng& rng);

struct BatchItem {
  SlackAugmentedExample example;
  MaskedCanvas canvas;  // r~_t over the response region only; prompts stay intact
  double t;
};

using CorpusRecord = std::pair<CleanSequence, CleanSequence>;  // (prompt, response)

// Per example: sample s ~ U[0, s_max], build r~_0, then forward-mask the
// response region at the given t. Prompt positions are never masked (they are
// not part of the canvas).
std::vector<BatchItem> prepare_batch(std::span<const CorpusRecord> examples, double t,
                                     const AugmentConfig& cfg, const Vocabulary& vocab,
                                     double w_slack, Rng& rng,
                                     const NoiseSchedule& sched = linear_schedule());

// Per-example masking times (one t per example).
std::vector<BatchItem> prepare_batch(std::span<const CorpusRecord> examples,
                                     std::span<const double> ts, const AugmentConfig& cfg,
                                     const Vocabulary& vocab, double w_slack, Rng& rng,
                                     const NoiseSchedule& sched = linear_schedule());

// "prompt TAB response" per line. Throws IoError on unreadable files or
// malformed records.
std::vector<std::pair<std::string, std::string>> load_corpus_text(const std::string& path);

std::vector<CorpusRecord> tokenize_corpus(
    const std::vector<std::pair<std::string, std::string>>& records,
    const Vocabulary& vocab);

// True when the response plus its worst-case slack budget and terminal EOS
// fits the batch length.
bool fits_batch(const CleanSequence& response, const AugmentConfig& cfg);

}  // namespace mdlm
