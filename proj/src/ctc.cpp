// SPDX-License-Identifier: Apache-2.0
#include "mdlm/ctc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdlm::ctc {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

void validate_inputs(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                     int blank) {
  if (blank < 0 || blank >= log_probs.cols()) {
    throw std::invalid_argument("ctc: blank column out of range");
  }
  // callers owe rows within 1e-6 of a distribution; the check itself leaves
  // headroom so finite-difference probes of the gradient stay in contract
  for (Eigen::Index r = 0; r < log_probs.rows(); ++r) {
    const double row_sum = log_probs.row(r).array().exp().sum();
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw std::invalid_argument("ctc: row " + std::to_string(r) +
                                  " does not exponentiate to a distribution (sum " +
                                  std::to_string(row_sum) + ")");
    }
  }
  for (int s : target) {
    if (s < 0 || s >= log_probs.cols()) {
      throw std::invalid_argument("ctc: target symbol out of range");
    }
    if (s == blank) {
      throw std::invalid_argument("ctc: target may not contain the blank symbol");
    }
  }
}

std::vector<int> extend_target(std::span<const int> target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (size_t i = 0; i < target.size(); ++i) {
    ext[2 * i + 1] = target[i];
  }
  return ext;
}

}  // namespace

std::vector<int> collapse(std::span<const int> symbols, int blank) {
  std::vector<int> out;
  for (size_t i = 0; i < symbols.size(); ++i) {
    if (i > 0 && symbols[i] == symbols[i - 1]) continue;  // merge run
    if (symbols[i] == blank) continue;
    out.push_back(symbols[i]);
  }
  return out;
}

int min_alignment_length(std::span<const int> target) {
  int n = static_cast<int>(target.size());
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

Lattice forward_lattice(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                        int blank) {
  validate_inputs(log_probs, target, blank);

  Lattice lat;
  lat.ext_target = extend_target(target, blank);
  const int T = static_cast<int>(log_probs.rows());
  const int S = static_cast<int>(lat.ext_target.size());

  if (T < min_alignment_length(target)) {
    lat.status = Status::infeasible;
    lat.log_likelihood = kLogZero;
    return lat;
  }

  lat.log_alpha = Eigen::MatrixXd::Constant(T, S, kLogZero);
  auto& a = lat.log_alpha;
  const auto& ext = lat.ext_target;

  a(0, 0) = log_probs(0, ext[0]);
  if (S > 1) a(0, 1) = log_probs(0, ext[1]);

  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = a(t - 1, s);
      if (s >= 1) acc = log_add(acc, a(t - 1, s - 1));
      // skip over a blank only when it does not separate a repeat
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]) {
        acc = log_add(acc, a(t - 1, s - 2));
      }
      if (acc != kLogZero) {
        a(t, s) = acc + log_probs(t, ext[s]);
      }
    }
  }

  double ll = a(T - 1, S - 1);
  if (S > 1) ll = log_add(ll, a(T - 1, S - 2));
  lat.log_likelihood = ll;
  lat.status = Status::ok;
  return lat;
}

Result log_likelihood(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                      int blank) {
  const Lattice lat = forward_lattice(log_probs, target, blank);
  return Result{lat.status, lat.log_likelihood};
}

Eigen::MatrixXd grad(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                     int blank) {
  const Lattice lat = forward_lattice(log_probs, target, blank);
  if (lat.status == Status::infeasible) {
    throw std::invalid_argument("ctc::grad: infeasible target (min alignment length " +
                                std::to_string(min_alignment_length(target)) + ", have " +
                                std::to_string(log_probs.rows()) + ")");
  }

  const int T = static_cast<int>(log_probs.rows());
  const int S = static_cast<int>(lat.ext_target.size());
  const auto& ext = lat.ext_target;

  // Backward table: beta(t, s) sums path probabilities from (t, s) exclusive
  // of the emission at t, so alpha(t, s) + beta(t, s) is the mass of all
  // complete paths through (t, s).
  Eigen::MatrixXd beta = Eigen::MatrixXd::Constant(T, S, kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta(t + 1, s) + log_probs(t + 1, ext[s]);
      if (s + 1 < S) {
        acc = log_add(acc, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      }
      if (s + 2 < S && ext[s + 2] != blank && ext[s + 2] != ext[s]) {
        acc = log_add(acc, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }

  // d(-log L)/d log_probs(t, k) = -sum_{s: ext[s]=k} exp(alpha + beta - log L)
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(T, log_probs.cols());
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const double occ = lat.log_alpha(t, s) + beta(t, s) - lat.log_likelihood;
      if (occ == kLogZero || std::isnan(occ)) continue;
      g(t, ext[s]) -= std::exp(occ);
    }
  }
  return g;
}

double oracle_likelihood(const Eigen::MatrixXd& log_probs, std::span<const int> target,
                         int blank) {
  const int T = static_cast<int>(log_probs.rows());
  const int V = static_cast<int>(log_probs.cols());
  if (T > 8 || V > 5) {
    throw std::invalid_argument("ctc::oracle_likelihood: bounds exceeded (need T <= 8, support <= 5)");
  }
  validate_inputs(log_probs, target, blank);

  const std::vector<int> want(target.begin(), target.end());
  std::vector<int> a(T, 0);
  double total = 0.0;
  while (true) {
    if (collapse(a, blank) == want) {
      double p = 1.0;
      for (int t = 0; t < T; ++t) {
        p *= std::exp(log_probs(t, a[t]));
      }
      total += p;
    }
    int pos = T - 1;
    while (pos >= 0 && a[pos] == V - 1) {
      a[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++a[pos];
  }
  return total;
}

}  // namespace mdlm::ctc
