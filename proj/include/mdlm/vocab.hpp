// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdlm/sequence.hpp"

namespace mdlm {

// Token/id mapping plus the reserved MASK, SLACK, EOS ids.
//
// Ordinary tokens are single characters (code points) sorted by code point;
// the specials follow in the fixed order MASK, SLACK, EOS. MASK is an
// input-only symbol and is never part of the predictor output support; the
// support is {ordinary tokens} u {SLACK, EOS}, indexed contiguously as
// [0, base_size) for ordinary ids, base_size for SLACK, base_size + 1 for EOS.
class Vocabulary {
 public:
  Vocabulary() = default;

  // One ordinary token per distinct character in `text`. Throws ConfigError
  // on an empty corpus.
  static Vocabulary from_corpus_text(const std::string& text);
  static Vocabulary from_tokens(std::vector<std::string> ordinary_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int base_size() const { return base_size_; }
  int mask_id() const { return base_size_; }
  int slack_id() const { return base_size_ + 1; }
  int eos_id() const { return base_size_ + 2; }

  int support_size() const { return base_size_ + 2; }
  // Support column of a token id; MASK has no column (throws).
  int support_of_id(int id) const;
  int id_of_support(int s) const;

  const std::string& token(int id) const { return tokens_.at(id); }
  bool has_token(const std::string& tok) const { return id_of_.count(tok) != 0; }
  int id_of(const std::string& tok) const;

  // Character-wise encode; throws ConfigError on characters missing from the
  // vocabulary. The result is always a CleanSequence (no MASK/SLACK).
  CleanSequence encode(const std::string& text) const;
  // Renders ordinary tokens as themselves and specials as their glyph names.
  std::string decode(std::span<const int> ids) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && base_size_ == other.base_size_;
  }

 private:
  void finalize(std::vector<std::string> ordinary_sorted);

  std::vector<std::string> tokens_;  // id order, specials last
  std::unordered_map<std::string, int> id_of_;
  int base_size_ = 0;
};

// Splits UTF-8 text into per-code-point strings. Invalid bytes are kept as
// single-byte tokens.
std::vector<std::string> split_utf8(const std::string& text);

}  // namespace mdlm
