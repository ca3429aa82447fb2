#include "scenediff/sampler.hpp"

#include <cmath>

#include "scenediff/augment.hpp"

namespace scenediff {

namespace {

constexpr real kTwoPi = 6.283185307179586476925286766559;

void check_all_finite(const std::vector<real>& v, int64_t k, const char* what) {
  for (real x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("sampling produced a non-finite ") + what +
                         " at diffusion step " + std::to_string(k));
    }
  }
}

}  // namespace

std::vector<real> init_noise(int64_t N, int64_t T, int64_t H, uint64_t seed) {
  if (N < 1 || T < 2 || H < 1) throw ShapeError("init_noise: degenerate shape");
  Rng rng(seed);
  std::vector<real> eps0(static_cast<size_t>(N * T * H));
  for (real& v : eps0) v = rng.gaussian();
  return augment_noise(eps0, N, T, H);
}

std::vector<real> guide(std::vector<real> values, int64_t N, int64_t Tm, int64_t H2) {
  if (H2 % 2 != 0) throw ShapeError("guide: channel extent must be even");
  if (static_cast<int64_t>(values.size()) != N * Tm * H2) {
    throw ShapeError("guide: size does not match the declared shape");
  }
  const int64_t H = H2 / 2;
  for (int64_t a = 0; a < N; ++a) {
    for (int64_t t = 1; t < Tm; ++t) {
      real* rear_prev = values.data() + ((a * Tm + t - 1) * H2 + H);
      real* front_cur = values.data() + (a * Tm + t) * H2;
      for (int64_t c = 0; c < H; ++c) {
        const real m = (rear_prev[c] + front_cur[c]) / 2;
        rear_prev[c] = m;
        front_cur[c] = m;
      }
    }
  }
  return values;
}

std::vector<real> ddim_jump(const std::vector<real>& S_k, int64_t k_from, int64_t k_to,
                            const std::vector<real>& eps_pred, const NoiseSchedule& sched) {
  if (k_from < 1 || k_from > sched.K) throw ValidationError("ddim_jump: step out of range");
  if (k_to < 0 || k_to >= k_from) throw ValidationError("ddim_jump: target step must precede k");
  if (S_k.size() != eps_pred.size()) throw ShapeError("ddim_jump: state and noise sizes differ");
  const real ab_from = sched.alpha_bar[static_cast<size_t>(k_from)];
  const real ab_to = sched.alpha_bar[static_cast<size_t>(k_to)];
  const real c_state = std::sqrt(ab_to / ab_from);
  const real c_noise = std::sqrt(1 - ab_to) - std::sqrt(ab_to * (1 - ab_from) / ab_from);
  std::vector<real> out(S_k.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c_state * S_k[i] + c_noise * eps_pred[i];
  return out;
}

std::vector<real> ddim_step(const std::vector<real>& S_k, int64_t k,
                            const std::vector<real>& eps_pred, const NoiseSchedule& sched) {
  return ddim_jump(S_k, k, k - 1, eps_pred, sched);
}

std::vector<real> reverse_diffuse(std::vector<real> S, int64_t N, int64_t Tm, int64_t C,
                                  const DenoiseFn& fn, const NoiseSchedule& sched, bool augmented,
                                  bool guidance, bool guide_states, int64_t stride) {
  if (stride < 1) throw ValidationError("reverse_diffuse: stride must be at least 1");
  if (static_cast<int64_t>(S.size()) != N * Tm * C) {
    throw ShapeError("reverse_diffuse: state size does not match the declared shape");
  }
  NoGradGuard frozen;
  const Shape shape{N, Tm, C};
  int64_t k = sched.K;
  while (k > 0) {
    const Tensor pred = fn(Tensor::from_data(shape, S), k);
    if (pred.shape() != shape) throw ShapeError("reverse_diffuse: predictor shape mismatch");
    std::vector<real> eps = pred.data();
    check_all_finite(eps, k, "noise prediction");
    if (augmented && guidance && !guide_states) eps = guide(std::move(eps), N, Tm, C);
    const int64_t k_to = std::max<int64_t>(0, k - stride);
    S = ddim_jump(S, k, k_to, eps, sched);
    if (augmented && guidance && guide_states) S = guide(std::move(S), N, Tm, C);
    check_all_finite(S, k_to, "state");
    k = k_to;
  }
  return S;
}

std::vector<std::vector<PoseState>> integrate_states(const SceneData& scene,
                                                     const std::vector<real>& states, int64_t T,
                                                     real dt) {
  const int64_t n = static_cast<int64_t>(scene.agents.size());
  if (!(dt > 0)) throw ValidationError("integrate_states: non-positive tick");
  if (static_cast<int64_t>(states.size()) != n * T * 3) {
    throw ShapeError("integrate_states: states must be n x T x 3");
  }
  std::vector<std::vector<PoseState>> out(static_cast<size_t>(n));
  for (int64_t a = 0; a < n; ++a) {
    const AgentTrack& agent = scene.agents[static_cast<size_t>(a)];
    if (agent.history.empty()) throw ValidationError("integrate_states: agent lacks observed poses");
    const PoseState& anchor = agent.history.back();
    real x = anchor.x, y = anchor.y, h = anchor.heading;
    std::vector<PoseState>& track = out[static_cast<size_t>(a)];
    track.reserve(static_cast<size_t>(T));
    for (int64_t t = 0; t < T; ++t) {
      const size_t base = static_cast<size_t>((a * T + t) * 3);
      const real vx = states[base], vy = states[base + 1], omega = states[base + 2];
      x += dt * vx;
      y += dt * vy;
      h = std::remainder(h + dt * omega, kTwoPi);
      track.push_back({anchor.t + dt * static_cast<real>(t + 1), x, y, h, std::hypot(vx, vy)});
    }
  }
  return out;
}

SceneRollouts sample_scene(const SceneData& scene, const DenoiserConfig& cfg, const DenoiseFn& fn,
                           const NoiseSchedule& sched, const StateStats& stats,
                           const SampleSpec& spec) {
  if (spec.M < 1) throw ValidationError("sample_scene: at least one rollout required");
  if (!(spec.dt > 0)) throw ValidationError("sample_scene: non-positive tick");
  if (cfg.H != 3) throw ValidationError("sample_scene: pose integration needs H = 3 states");
  if (sched.K != cfg.K) throw ValidationError("sample_scene: schedule and model step counts differ");
  const int64_t n = static_cast<int64_t>(scene.agents.size());
  if (n < 1) throw ValidationError("sample_scene: scene has no agents");
  const int64_t Tm = cfg.augmented ? cfg.T - 1 : cfg.T;
  const int64_t C = cfg.augmented ? 2 * cfg.H : cfg.H;

  SceneRollouts result;
  result.scene_id = scene.scene_id;
  result.rollouts.reserve(static_cast<size_t>(spec.M));
  for (int64_t m = 0; m < spec.M; ++m) {
    const uint64_t rollout_seed = split_seed(spec.seed, static_cast<uint64_t>(m));
    std::vector<real> start;
    if (cfg.augmented) {
      start = init_noise(n, cfg.T, cfg.H, rollout_seed);
    } else {
      Rng rng(rollout_seed);
      start.resize(static_cast<size_t>(n * cfg.T * cfg.H));
      for (real& v : start) v = rng.gaussian();
    }
    std::vector<real> states;
    try {
      const std::vector<real> S0 =
          reverse_diffuse(std::move(start), n, Tm, C, fn, sched, cfg.augmented,
                          spec.guidance_enabled, spec.guide_states, spec.stride);
      states = cfg.augmented ? de_augment(S0, n, Tm, C) : S0;
    } catch (const NumericError& e) {
      throw NumericError("scene '" + scene.scene_id + "' rollout " + std::to_string(m) + ": " +
                         e.what());
    }
    denormalize_states(states, stats, cfg.H);
    Rollout r;
    r.rollout_id = m;
    r.agent_poses = integrate_states(scene, states, cfg.T, spec.dt);
    result.rollouts.push_back(std::move(r));
  }
  return result;
}

SceneRollouts sample_scene(const SceneData& scene, Model& model, const NoiseSchedule& sched,
                           const StateStats& stats, const SampleSpec& spec) {
  NoGradGuard frozen;
  const Tensor cond = model.encode(extract_features(scene, model.config()));
  const DenoiseFn fn = [&](const Tensor& S_k, int64_t k) { return model.denoise(S_k, k, cond); };
  return sample_scene(scene, model.config(), fn, sched, stats, spec);
}

}  // namespace scenediff
