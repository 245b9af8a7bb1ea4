// SPDX-License-Identifier: Apache-2.0
#include "mdlm/schedule.hpp"

#include <stdexcept>
#include <string>

namespace mdlm {

double NoiseSchedule::gamma(double t) const {
  if (t <= 0.0) {
    throw std::domain_error("gamma(t) is singular at t = 0");
  }
  const double denom = 1.0 - alpha(t);
  if (denom <= 0.0) {
    throw std::domain_error("gamma(t): alpha(t) = 1, weight undefined");
  }
  return -alpha_prime(t) / denom;
}

const NoiseSchedule& linear_schedule() {
  static const LinearSchedule s;
  return s;
}

double gamma_weight(double t) { return linear_schedule().gamma(t); }

double gamma_weight(double t, const NoiseSchedule& sched) { return sched.gamma(t); }

MaskedCanvas forward_mask(std::span<const int> ids, double t, int mask_id, Rng& rng) {
  return forward_mask(ids, t, mask_id, rng, linear_schedule());
}

MaskedCanvas forward_mask(std::span<const int> ids, double t, int mask_id, Rng& rng,
                          const NoiseSchedule& sched) {
  if (t < 0.0 || t > 1.0) {
    throw std::invalid_argument("forward_mask: t = " + std::to_string(t) +
                                " outside [0, 1]");
  }
  const double p_mask = 1.0 - sched.alpha(t);
  MaskedCanvas canvas;
  canvas.mask = mask_id;
  canvas.ids.resize(ids.size());
  canvas.committed.resize(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    const bool masked = rng.unit() < p_mask;
    canvas.ids[i] = masked ? mask_id : ids[i];
    canvas.committed[i] = masked ? 0 : 1;
  }
  return canvas;
}

}  // namespace mdlm
