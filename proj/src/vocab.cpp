// SPDX-License-Identifier: Apache-2.0
#include "mdlm/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mdlm/errors.hpp"

namespace mdlm {

namespace {

constexpr const char* kMaskGlyph = "<mask>";
constexpr const char* kSlackGlyph = "<slack>";
constexpr const char* kEosGlyph = "<eos>";

std::string escape_token(const std::string& tok) {
  std::string out;
  for (char c : tok) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_token(const std::string& line) {
  std::string out;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\' || i + 1 == line.size()) {
      out += line[i];
      continue;
    }
    ++i;
    switch (line[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: out += line[i];
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> split_utf8(const std::string& text) {
  std::vector<std::string> chars;
  size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    size_t len = 1;
    if ((b & 0xE0) == 0xC0) {
      len = 2;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4;
    }
    if (i + len > text.size()) len = 1;
    // continuation bytes must match 10xxxxxx, otherwise fall back to 1 byte
    for (size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    chars.push_back(text.substr(i, len));
    i += len;
  }
  return chars;
}

Vocabulary Vocabulary::from_corpus_text(const std::string& text) {
  if (text.empty()) {
    throw ConfigError("vocabulary: empty corpus");
  }
  std::set<std::string> distinct;
  for (auto& c : split_utf8(text)) {
    distinct.insert(c);
  }
  // UTF-8 byte order equals code-point order, so the set is already sorted.
  return from_tokens(std::vector<std::string>(distinct.begin(), distinct.end()));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> ordinary_tokens) {
  if (ordinary_tokens.empty()) {
    throw ConfigError("vocabulary: no ordinary tokens");
  }
  std::sort(ordinary_tokens.begin(), ordinary_tokens.end());
  ordinary_tokens.erase(std::unique(ordinary_tokens.begin(), ordinary_tokens.end()),
                        ordinary_tokens.end());
  Vocabulary v;
  v.finalize(std::move(ordinary_tokens));
  return v;
}

void Vocabulary::finalize(std::vector<std::string> ordinary_sorted) {
  base_size_ = static_cast<int>(ordinary_sorted.size());
  tokens_ = std::move(ordinary_sorted);
  tokens_.push_back(kMaskGlyph);
  tokens_.push_back(kSlackGlyph);
  tokens_.push_back(kEosGlyph);
  id_of_.clear();
  for (int i = 0; i < base_size_; ++i) {
    id_of_[tokens_[i]] = i;
  }
}

int Vocabulary::support_of_id(int id) const {
  if (id >= 0 && id < base_size_) return id;
  if (id == slack_id()) return base_size_;
  if (id == eos_id()) return base_size_ + 1;
  throw ConfigError("support_of_id: id " + std::to_string(id) +
                    " has no output-support column");
}

int Vocabulary::id_of_support(int s) const {
  if (s >= 0 && s < base_size_) return s;
  if (s == base_size_) return slack_id();
  if (s == base_size_ + 1) return eos_id();
  throw ConfigError("id_of_support: column " + std::to_string(s) + " out of range");
}

int Vocabulary::id_of(const std::string& tok) const {
  auto it = id_of_.find(tok);
  if (it == id_of_.end()) {
    throw ConfigError("vocabulary: unknown token '" + escape_token(tok) + "'");
  }
  return it->second;
}

CleanSequence Vocabulary::encode(const std::string& text) const {
  CleanSequence seq;
  for (auto& c : split_utf8(text)) {
    seq.ids.push_back(id_of(c));
  }
  return seq;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) {
      throw ConfigError("decode: id " + std::to_string(id) + " out of range");
    }
    out += tokens_[id];
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("vocabulary: cannot open for write: " + path);
  }
  f << "mdlm-vocab v1 base=" << base_size_ << " mask=" << mask_id()
    << " slack=" << slack_id() << " eos=" << eos_id() << "\n";
  for (const auto& tok : tokens_) {
    f << escape_token(tok) << "\n";
  }
  if (!f) {
    throw IoError("vocabulary: write failed: " + path);
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("vocabulary: cannot open: " + path);
  }
  std::string header;
  if (!std::getline(f, header)) {
    throw IoError("vocabulary: empty file: " + path);
  }
  int base = -1, mask = -1, slack = -1, eos = -1;
  char tag[16] = {0};
  if (std::sscanf(header.c_str(), "mdlm-vocab %15s base=%d mask=%d slack=%d eos=%d",
                  tag, &base, &mask, &slack, &eos) != 5 ||
      std::string(tag) != "v1") {
    throw IoError("vocabulary: bad header: " + header);
  }
  if (base <= 0 || mask != base || slack != base + 1 || eos != base + 2) {
    throw IoError("vocabulary: inconsistent special ids in header");
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(f, line)) {
    tokens.push_back(unescape_token(line));
  }
  if (static_cast<int>(tokens.size()) != base + 3) {
    throw IoError("vocabulary: expected " + std::to_string(base + 3) +
                  " token lines, found " + std::to_string(tokens.size()));
  }
  std::vector<std::string> ordinary(tokens.begin(), tokens.begin() + base);
  for (size_t i = 1; i < ordinary.size(); ++i) {
    if (!(ordinary[i - 1] < ordinary[i])) {
      throw IoError("vocabulary: ordinary tokens not strictly sorted");
    }
  }
  Vocabulary v;
  v.finalize(std::move(ordinary));
  return v;
}

}  // namespace mdlm
