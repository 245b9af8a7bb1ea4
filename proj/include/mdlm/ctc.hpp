// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace mdlm::ctc {

// The collapse function: replace each maximal run of identical symbols with a
// single symbol, then remove every `blank` symbol. `blank` plays the SLACK
// role; any other int is treated as an ordinary symbol.
std::vector<int> collapse(std::span<const int> symbols, int blank);

// Shortest alignment that can collapse to `target`: |target| plus one blank
// per adjacent identical pair.
int min_alignment_length(std::span<const int> target);

enum class Status {
  ok,
  infeasible,  // no alignment of this length collapses to the target
};

struct Result {
  Status status = Status::ok;
  double log_likelihood = 0.0;  // meaningful only when status == ok
  bool feasible() const { return status == Status::ok; }
};

// Log-space forward DP over the blank-extended target (length 2L + 1,
// blanks at even indices).
struct Lattice {
  std::vector<int> ext_target;
  Eigen::MatrixXd log_alpha;  // positions x (2L + 1)
  double log_likelihood = 0.0;
  Status status = Status::ok;
};

// log_probs: one row per alignment position, one column per support symbol;
// each row must exponentiate to a distribution within 1e-6. target holds
// support column indices and may not contain `blank`.
Lattice forward_lattice(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                        int blank);

// log sum over all alignments a with collapse(a) = target of prod_i P(a_i).
Result log_likelihood(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                      int blank);

// Gradient of -log_likelihood with respect to log_probs, via
// forward-backward occupancy. Throws std::invalid_argument on infeasible
// targets.
Eigen::MatrixXd grad(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                     int blank);

// Exhaustive enumeration oracle: sums exact products over all
// support^positions alignments whose collapse equals the target. Bounds:
// positions <= 8 and support <= 5 (throws std::invalid_argument beyond).
double oracle_likelihood(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                         int blank);

}  // namespace mdlm::ctc
