// Deterministic reverse-diffusion sampling with overlap guidance, plus the
// integration of sampled velocity states into world-frame trajectories.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "scenediff/model.hpp"
#include "scenediff/scenario.hpp"
#include "scenediff/schedule.hpp"
#include "scenediff/train.hpp"

namespace scenediff {

// Starting noise with the shared-overlap structure: the adjacent-concatenation
// map applied to an i.i.d. standard normal draw of shape N x T x H.
std::vector<real> init_noise(int64_t N, int64_t T, int64_t H, uint64_t seed);

// Replaces rear(element t-1) and front(element t) by their mean at every
// interior boundary. Idempotent; exact fixed point on consistent input.
std::vector<real> guide(std::vector<real> values, int64_t N, int64_t Tm, int64_t H2);

// Deterministic reverse transition from step k_from to step k_to < k_from:
//   S' = sqrt(ab_to/ab_from) * S + (sqrt(1-ab_to) - sqrt(ab_to*(1-ab_from)/ab_from)) * eps.
std::vector<real> ddim_jump(const std::vector<real>& S_k, int64_t k_from, int64_t k_to,
                            const std::vector<real>& eps_pred, const NoiseSchedule& sched);

// Single-step form (k -> k-1).
std::vector<real> ddim_step(const std::vector<real>& S_k, int64_t k,
                            const std::vector<real>& eps_pred, const NoiseSchedule& sched);

// Noise predictor with the conditioning already bound; returns the predicted
// noise for the given states at diffusion step k.
using DenoiseFn = std::function<Tensor(const Tensor& S_k, int64_t k)>;

struct SampleSpec {
  int64_t M = 8;                 // rollouts per scene
  bool guidance_enabled = true;  // overlap averaging each step
  bool guide_states = false;     // average the latent states instead of the noise
  int64_t stride = 1;            // step skip for faster sampling
  uint64_t seed = 0;
  real dt = 0.5;                 // integration tick
};

// Runs the reverse transitions from the given state at step sched.K down to
// step 0, re-predicting noise each visit. Aborts with NumericError if any
// state leaves the finite range.
std::vector<real> reverse_diffuse(std::vector<real> S, int64_t N, int64_t Tm, int64_t C,
                                  const DenoiseFn& fn, const NoiseSchedule& sched, bool augmented,
                                  bool guidance, bool guide_states, int64_t stride);

// Integrates per-tick (vx, vy, yaw rate) states, flattened n x T x 3, from
// each agent's last observed pose at fixed dt. Position and heading integrate
// independently; the stored speed is the velocity magnitude.
std::vector<std::vector<PoseState>> integrate_states(const SceneData& scene,
                                                     const std::vector<real>& states, int64_t T,
                                                     real dt);

// Model-free seam: the caller provides the bound noise predictor.
SceneRollouts sample_scene(const SceneData& scene, const DenoiserConfig& cfg, const DenoiseFn& fn,
                           const NoiseSchedule& sched, const StateStats& stats,
                           const SampleSpec& spec);

// Production path: encodes the scene once and binds the model as predictor.
SceneRollouts sample_scene(const SceneData& scene, Model& model, const NoiseSchedule& sched,
                           const StateStats& stats, const SampleSpec& spec);

}  // namespace scenediff
