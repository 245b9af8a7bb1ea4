// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "mdlm/rng.hpp"
#include "mdlm/sequence.hpp"

namespace mdlm {

// Noise schedule alpha(t): the probability a token survives unmasked at time
// t in [0,1]. alpha is strictly decreasing with alpha(0) = 1 and alpha(1) = 0.
// The per-timestep CE weight is gamma(t) = -alpha'(t) / (1 - alpha(t)).
class NoiseSchedule {
 public:
  virtual ~NoiseSchedule() = default;
  virtual double alpha(double t) const = 0;
  virtual double alpha_prime(double t) const = 0;

  // Throws std::domain_error at t = 0 (the weight is singular there).
  double gamma(double t) const;
};

// alpha(t) = 1 - t; gamma(t) = 1/t.
class LinearSchedule final : public NoiseSchedule {
 public:
  double alpha(double t) const override { return 1.0 - t; }
  double alpha_prime(double /*t*/) const override { return -1.0; }
};

const NoiseSchedule& linear_schedule();

double gamma_weight(double t);
double gamma_weight(double t, const NoiseSchedule& sched);

// Independently replaces each position by MASK with probability
// 1 - alpha(t); surviving positions are copied verbatim and marked committed.
MaskedCanvas forward_mask(std::span<const int> ids, double t, int mask_id, Rng& rng);
MaskedCanvas forward_mask(std::span<const int> ids, double t, int mask_id, Rng& rng,
                          const NoiseSchedule& sched);

}  // namespace mdlm
