// SPDX-License-Identifier: Apache-2.0
#include "mdlm/tasks.hpp"

#include <algorithm>

#include "mdlm/errors.hpp"
#include "mdlm/rng.hpp"

namespace mdlm {

namespace {

std::string random_string(Rng& rng, const std::string& alphabet, size_t min_len,
                          size_t max_len) {
  const size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (size_t i = 0; i < len; ++i) {
    s += alphabet[rng.below(alphabet.size())];
  }
  return s;
}

std::string digits_with_repeat(Rng& rng) {
  // trailing zeros or a doubled digit, both common in numeric text
  if (rng.below(2) == 0) {
    std::string s(1, static_cast<char>('1' + rng.below(9)));
    const size_t zeros = 2 + rng.below(2);
    s.append(zeros, '0');
    return s;
  }
  std::string s;
  const size_t len = 3 + rng.below(2);
  for (size_t i = 0; i < len; ++i) s += static_cast<char>('0' + rng.below(10));
  const size_t at = rng.below(s.size());
  s.insert(s.begin() + at, s[at]);  // double one digit
  return s;
}

std::string digits_without_repeat(Rng& rng) {
  std::string s(1, static_cast<char>('1' + rng.below(9)));
  while (s.size() < 4) {
    char c;
    do {
      c = static_cast<char>('0' + rng.below(10));
    } while (c == s.back());
    s += c;
  }
  return s;
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"copy", "reverse", "recall", "digits"};
  return names;
}

bool known_task(const std::string& name) {
  const auto& names = task_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<TaskExample> generate_suite(const std::string& name, int n, uint64_t seed) {
  if (!known_task(name)) {
    throw ConfigError("unknown task '" + name + "'");
  }
  Rng rng(seed ^ 0x7A5C5EEDULL);
  std::vector<TaskExample> suite;
  suite.reserve(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    TaskExample ex;
    if (name == "copy") {
      // fixed-length strings keep the prompt geometry constant and fill most
      // of a 64-position canvas, so positional interventions hit content
      const std::string s = random_string(rng, "abcdefghijkl", 36, 36);
      ex.prompt = "copy: " + s;
      ex.reference = s;
    } else if (name == "reverse") {
      const std::string s = random_string(rng, "abcdefgh", 4, 12);
      ex.prompt = "rev: " + s;
      ex.reference = std::string(s.rbegin(), s.rend());
    } else if (name == "recall") {
      const int n_keys = 2 + static_cast<int>(rng.below(2));
      std::vector<char> ks = {'a', 'b', 'c'};  // distinct keys, random order
      shuffle(ks, rng);
      std::string prompt;
      std::vector<std::string> vals(static_cast<size_t>(n_keys));
      for (int k = 0; k < n_keys; ++k) {
        vals[k] = random_string(rng, "mnopqrst", 2, 4);
        prompt += ks[k];
        prompt += '=';
        prompt += vals[k];
        prompt += ';';
      }
      const int want = static_cast<int>(rng.below(static_cast<uint64_t>(n_keys)));
      prompt += '?';
      prompt += ks[want];
      ex.prompt = prompt;
      ex.reference = vals[want];
    } else {  // digits
      const std::string v = (i % 5 < 3) ? digits_with_repeat(rng) : digits_without_repeat(rng);
      ex.prompt = "num: " + v;
      ex.reference = v;
    }
    suite.push_back(std::move(ex));
  }
  return suite;
}

int levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double edit_similarity(const std::string& output, const std::string& reference) {
  const size_t denom = std::max<size_t>({output.size(), reference.size(), 1});
  const double d = static_cast<double>(levenshtein(output, reference));
  return 1.0 - d / static_cast<double>(denom);
}

double exact_match(const std::string& output, const std::string& reference) {
  return output == reference ? 1.0 : 0.0;
}

bool has_adjacent_repeat(const std::string& s) {
  for (size_t i = 1; i < s.size(); ++i) {
    if (s[i] == s[i - 1]) return true;
  }
  return false;
}

bool is_repeat_drop(const std::string& output, const std::string& reference) {
  if (output.size() + 1 != reference.size()) return false;
  for (size_t i = 1; i < reference.size(); ++i) {
    if (reference[i] != reference[i - 1]) continue;
    std::string candidate = reference;
    candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(i));
    if (candidate == output) return true;
  }
  return false;
}

bool is_single_char_drop(const std::string& output, const std::string& reference) {
  if (output.size() + 1 != reference.size()) return false;
  for (size_t i = 0; i < reference.size(); ++i) {
    std::string candidate = reference;
    candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(i));
    if (candidate == output) return true;
  }
  return false;
}

}  // namespace mdlm
