// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mdlm {

struct TaskExample {
  std::string prompt;
  std::string reference;
};

// Known tasks: "copy", "reverse", "recall", "digits". Suites are
// deterministic in (name, n, seed); the digit task guarantees that at least
// half of the references contain an adjacent repeated character (trailing
// zeros, doubled digits). Throws ConfigError on unknown names.
std::vector<TaskExample> generate_suite(const std::string& name, int n, uint64_t seed);

bool known_task(const std::string& name);
const std::vector<std::string>& task_names();

int levenshtein(const std::string& a, const std::string& b);

// 1 - edit_distance / max(len); 1.0 for an exact match, >= 0 always.
double edit_similarity(const std::string& output, const std::string& reference);

double exact_match(const std::string& output, const std::string& reference);

bool has_adjacent_repeat(const std::string& s);

// True when `output` equals `reference` with exactly one character deleted
// from a run of >= 2 identical adjacent characters (e.g. "500" -> "50").
bool is_repeat_drop(const std::string& output, const std::string& reference);

// True when `output` equals `reference` with exactly one character deleted
// anywhere.
bool is_single_char_drop(const std::string& output, const std::string& reference);

}  // namespace mdlm
