// Noise schedules and the forward diffusion maps (plain and augmented).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenediff/common.hpp"

namespace scenediff {

enum class ScheduleKind { linear, cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind kind);

struct NoiseSchedule {
  int64_t K = 0;
  std::vector<real> beta;       // K entries; beta[j] drives step k = j+1
  std::vector<real> alpha_bar;  // K+1 entries; alpha_bar[0] = 1, index k holds the
                                // cumulative signal fraction after k steps
};

// beta_min/beta_max bound the linear ramp; the cosine form derives its betas
// from the squared-cosine signal curve and only validates the range arguments.
NoiseSchedule make_schedule(ScheduleKind kind, int64_t K, real beta_min, real beta_max);

// s_k = sqrt(alpha_bar_k) * s0 + sqrt(1 - alpha_bar_k) * eps, elementwise.
// k = 0 is the identity endpoint (alpha_bar[0] = 1).
std::vector<real> diffuse(const std::vector<real>& s0, int64_t k, const std::vector<real>& eps,
                          const NoiseSchedule& sched);

// Same affine map over an augmented array N x Tm x H2. eps_aug must carry the
// shared-noise overlap structure (rear half of element t == front half of
// element t+1, bit-exact); violating input is rejected.
std::vector<real> diffuse_augmented(const std::vector<real>& S0, int64_t N, int64_t Tm,
                                    int64_t H2, int64_t k, const std::vector<real>& eps_aug,
                                    const NoiseSchedule& sched);

}  // namespace scenediff
