#include "scenediff/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "scenediff/augment.hpp"

namespace scenediff {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ValidationError("unknown schedule kind '" + s + "' (expected linear|cosine)");
}

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "cosine";
}

NoiseSchedule make_schedule(ScheduleKind kind, int64_t K, real beta_min, real beta_max) {
  if (K < 2) throw ValidationError("schedule needs K >= 2, got " + std::to_string(K));
  if (!(real(0) < beta_min && beta_min < beta_max && beta_max < real(1))) {
    throw ValidationError("schedule needs 0 < beta_min < beta_max < 1");
  }
  NoiseSchedule sched;
  sched.K = K;
  sched.beta.resize(static_cast<size_t>(K));
  if (kind == ScheduleKind::linear) {
    for (int64_t j = 0; j < K; ++j) {
      sched.beta[static_cast<size_t>(j)] =
          beta_min + (beta_max - beta_min) * static_cast<real>(j) / static_cast<real>(K - 1);
    }
  } else {
    // Squared-cosine signal curve; betas fall out of consecutive ratios.
    const real s = real(0.008);
    auto f = [&](int64_t k) {
      const real x = (static_cast<real>(k) / static_cast<real>(K) + s) / (real(1) + s);
      const real c = std::cos(x * real(1.5707963267948966));
      return c * c;
    };
    const real f0 = f(0);
    for (int64_t j = 0; j < K; ++j) {
      const real b = real(1) - (f(j + 1) / f0) / (f(j) / f0);
      sched.beta[static_cast<size_t>(j)] = std::clamp(b, real(1e-8), real(0.999));
    }
  }
  sched.alpha_bar.resize(static_cast<size_t>(K + 1));
  sched.alpha_bar[0] = real(1);
  for (int64_t k = 1; k <= K; ++k) {
    sched.alpha_bar[static_cast<size_t>(k)] =
        sched.alpha_bar[static_cast<size_t>(k - 1)] * (real(1) - sched.beta[static_cast<size_t>(k - 1)]);
  }
  return sched;
}

std::vector<real> diffuse(const std::vector<real>& s0, int64_t k, const std::vector<real>& eps,
                          const NoiseSchedule& sched) {
  if (k < 0 || k > sched.K) {
    throw ValidationError("diffusion step " + std::to_string(k) + " outside [0," +
                          std::to_string(sched.K) + "]");
  }
  if (s0.size() != eps.size()) {
    throw ShapeError("diffuse: signal and noise sizes differ (" + std::to_string(s0.size()) +
                     " vs " + std::to_string(eps.size()) + ")");
  }
  const real ab = sched.alpha_bar[static_cast<size_t>(k)];
  const real cs = std::sqrt(ab);
  const real cn = std::sqrt(real(1) - ab);
  std::vector<real> out(s0.size());
  for (size_t i = 0; i < s0.size(); ++i) out[i] = cs * s0[i] + cn * eps[i];
  return out;
}

std::vector<real> diffuse_augmented(const std::vector<real>& S0, int64_t N, int64_t Tm,
                                    int64_t H2, int64_t k, const std::vector<real>& eps_aug,
                                    const NoiseSchedule& sched) {
  if (S0.size() != eps_aug.size() ||
      S0.size() != static_cast<size_t>(N * Tm * H2)) {
    throw ShapeError("diffuse_augmented: arrays do not match N x Tm x H2");
  }
  if (!overlap_consistent(eps_aug, N, Tm, H2, real(0))) {
    throw ValidationError("diffuse_augmented: noise lacks the shared-overlap structure");
  }
  return diffuse(S0, k, eps_aug, sched);
}

}  // namespace scenediff
