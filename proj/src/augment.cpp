// SPDX-License-Identifier: Apache-2.0
#include "mdlm/augment.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "mdlm/errors.hpp"

namespace mdlm {

std::vector<int> insert_slack(const CleanSequence& r0, double s, const AugmentConfig& cfg,
                              int slack_id, Rng& rng) {
  if (s < 0.0 || s > cfg.s_max) {
    throw std::invalid_argument("insert_slack: slack ratio " + std::to_string(s) +
                                " outside [0, " + std::to_string(cfg.s_max) + "]");
  }
  const size_t L = r0.length();
  const size_t n_slack = static_cast<size_t>(s * static_cast<double>(L));

  // slot k = insertion point before token k; slot L = after the last token
  std::vector<size_t> slot_count(L + 1, 0);
  for (size_t i = 0; i < n_slack; ++i) {
    slot_count[rng.below(L + 1)]++;
  }

  std::vector<int> out;
  out.reserve(L + n_slack);
  for (size_t k = 0; k <= L; ++k) {
    out.insert(out.end(), slot_count[k], slack_id);
    if (k < L) out.push_back(r0.ids[k]);
  }
  return out;
}

SlackAugmentedExample pad_and_convert(CleanSequence prompt, CleanSequence r0,
                                      std::vector<int> aug, const AugmentConfig& cfg,
                                      const Vocabulary& vocab, double w_slack, Rng& rng) {
  const size_t batch_len = static_cast<size_t>(cfg.batch_length);
  if (aug.size() + 1 > batch_len) {
    throw std::invalid_argument("pad_and_convert: sequence of length " +
                                std::to_string(aug.size()) +
                                " plus terminal EOS exceeds batch_length " +
                                std::to_string(cfg.batch_length));
  }
  const int eos = vocab.eos_id();
  const int slack = vocab.slack_id();

  std::vector<int> seq = std::move(aug);
  seq.push_back(eos);                       // semantic end of response
  size_t terminal_eos = seq.size() - 1;     // tracked across insertions
  const size_t padding = batch_len - seq.size();
  seq.insert(seq.end(), padding, eos);      // supervised padding

  const size_t cap =
      static_cast<size_t>(cfg.pad_convert_max * static_cast<double>(r0.length()));
  const size_t budget = std::min(cap, padding);
  const size_t n_convert = budget == 0 ? 0 : rng.below(budget + 1);

  for (size_t c = 0; c < n_convert; ++c) {
    seq.pop_back();  // consume one trailing padding EOS
    const size_t pos = rng.below(terminal_eos + 1);  // anywhere before terminal EOS
    seq.insert(seq.begin() + static_cast<std::ptrdiff_t>(pos), slack);
    ++terminal_eos;
  }

  SlackAugmentedExample ex;
  ex.prompt = std::move(prompt);
  ex.clean_target = std::move(r0);
  ex.ce_weight.resize(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    ex.ce_weight[i] = seq[i] == slack ? w_slack : 1.0;
  }
  ex.aug_target = std::move(seq);
  return ex;
}

std::vector<BatchItem> prepare_batch(std::span<const CorpusRecord> examples,
                                     std::span<const double> ts, const AugmentConfig& cfg,
                                     const Vocabulary& vocab, double w_slack, Rng& rng,
                                     const NoiseSchedule& sched) {
  if (ts.size() != examples.size()) {
    throw std::invalid_argument("prepare_batch: need one t per example");
  }
  std::vector<BatchItem> batch;
  batch.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto& [prompt, response] = examples[i];
    const double s = rng.uniform(0.0, cfg.s_max);
    auto aug = insert_slack(response, s, cfg, vocab.slack_id(), rng);
    auto ex = pad_and_convert(prompt, response, std::move(aug), cfg, vocab, w_slack, rng);
    auto canvas = forward_mask(ex.aug_target, ts[i], vocab.mask_id(), rng, sched);
    batch.push_back(BatchItem{std::move(ex), std::move(canvas), ts[i]});
  }
  return batch;
}

std::vector<BatchItem> prepare_batch(std::span<const CorpusRecord> examples, double t,
                                     const AugmentConfig& cfg, const Vocabulary& vocab,
                                     double w_slack, Rng& rng, const NoiseSchedule& sched) {
  std::vector<double> ts(examples.size(), t);
  return prepare_batch(examples, ts, cfg, vocab, w_slack, rng, sched);
}

std::vector<std::pair<std::string, std::string>> load_corpus_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("corpus: cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError("corpus: line " + std::to_string(lineno) + " has no TAB separator");
    }
    records.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return records;
}

std::vector<CorpusRecord> tokenize_corpus(
    const std::vector<std::pair<std::string, std::string>>& records,
    const Vocabulary& vocab) {
  std::vector<CorpusRecord> out;
  out.reserve(records.size());
  for (const auto& [p, r] : records) {
    out.emplace_back(vocab.encode(p), vocab.encode(r));
  }
  return out;
}

bool fits_batch(const CleanSequence& response, const AugmentConfig& cfg) {
  const size_t L = response.length();
  const size_t worst = L + static_cast<size_t>(cfg.s_max * static_cast<double>(L)) + 1;
  return worst <= static_cast<size_t>(cfg.batch_length);
}

}  // namespace mdlm
