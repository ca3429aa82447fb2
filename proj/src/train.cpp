#include "scenediff/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scenediff/augment.hpp"

namespace scenediff {

namespace {

constexpr real kTwoPi = 6.283185307179586476925286766559;

std::vector<uint8_t> invalid_of(const std::vector<uint8_t>& mask, int64_t n) {
  std::vector<uint8_t> inv(static_cast<size_t>(n), 0);
  if (mask.empty()) return inv;
  if (static_cast<int64_t>(mask.size()) != n) {
    throw ShapeError("loss mask length does not match the agent count");
  }
  for (int64_t i = 0; i < n; ++i) inv[static_cast<size_t>(i)] = mask[static_cast<size_t>(i)] ? 0 : 1;
  return inv;
}

// Mean of d over the unmasked agents' cells, squared or absolute.
Tensor masked_mean_error(const Tensor& d, const std::vector<uint8_t>& invalid, bool l1) {
  const Shape& s = d.shape();
  const int64_t n = s[0];
  const int64_t per_agent = s[1] * s[2];
  int64_t kept = 0;
  for (uint8_t v : invalid) kept += v ? 0 : 1;
  if (kept == 0) throw ValidationError("loss: every agent in the batch is masked");

  Tensor dm = d;
  if (kept < n) {
    std::vector<real> cell(static_cast<size_t>(n * per_agent), 0);
    for (int64_t i = 0; i < n; ++i) {
      if (!invalid[static_cast<size_t>(i)]) continue;
      std::fill(cell.begin() + i * per_agent, cell.begin() + (i + 1) * per_agent, real(1));
    }
    dm = masked_fill(dm, Tensor::from_data(s, cell), 0);
  }
  const real denom = static_cast<real>(kept * per_agent);
  if (l1) {
    const real total = static_cast<real>(n * per_agent);
    return scalar_mul(abs_mean(dm), total / denom);
  }
  return scalar_mul(sum_all(mul(dm, dm)), real(1) / denom);
}

void check_rank3(const Tensor& t, const char* what) {
  if (t.shape().size() != 3) throw ShapeError(std::string(what) + " must be rank 3");
}

}  // namespace

std::vector<real> scene_states(const SceneData& scene, const DenoiserConfig& cfg) {
  const int64_t n = static_cast<int64_t>(scene.agents.size());
  if (n < 1) throw ValidationError("scene_states: scene has no agents");
  const int64_t T = cfg.T;
  std::vector<real> out;
  out.reserve(static_cast<size_t>(n * T * cfg.H));
  for (const AgentTrack& a : scene.agents) {
    if (a.history.empty()) throw ValidationError("scene_states: agent lacks observed poses");
    if (static_cast<int64_t>(a.future.size()) != T) {
      throw ValidationError("scene_states: agent future length does not match the configured horizon");
    }
    const real dt = a.future.front().t - a.history.back().t;
    if (!(dt > 0)) throw ValidationError("scene_states: non-positive tick spacing");
    const PoseState* prev = &a.history.back();
    for (int64_t t = 0; t < T; ++t) {
      const PoseState& cur = a.future[static_cast<size_t>(t)];
      out.push_back((cur.x - prev->x) / dt);
      out.push_back((cur.y - prev->y) / dt);
      out.push_back(std::remainder(cur.heading - prev->heading, kTwoPi) / dt);
      prev = &cur;
    }
  }
  return out;
}

StateStats compute_state_stats(const std::vector<SceneData>& scenes, const DenoiserConfig& cfg) {
  const int64_t H = cfg.H;
  std::vector<real> sum(static_cast<size_t>(H), 0), sq(static_cast<size_t>(H), 0);
  int64_t count = 0;
  for (const SceneData& s : scenes) {
    const std::vector<real> st = scene_states(s, cfg);
    for (size_t i = 0; i < st.size(); ++i) {
      const size_t c = i % static_cast<size_t>(H);
      sum[c] += st[i];
      sq[c] += st[i] * st[i];
    }
    count += static_cast<int64_t>(st.size()) / H;
  }
  if (count == 0) throw ValidationError("compute_state_stats: empty scenario collection");
  StateStats stats;
  stats.mu.resize(static_cast<size_t>(H));
  stats.sigma.resize(static_cast<size_t>(H));
  for (int64_t c = 0; c < H; ++c) {
    const real mu = sum[static_cast<size_t>(c)] / static_cast<real>(count);
    const real var = sq[static_cast<size_t>(c)] / static_cast<real>(count) - mu * mu;
    stats.mu[static_cast<size_t>(c)] = mu;
    stats.sigma[static_cast<size_t>(c)] = var > 1e-12 ? std::sqrt(var) : real(1);
  }
  return stats;
}

void normalize_states(std::vector<real>& states, const StateStats& stats, int64_t H) {
  if (static_cast<int64_t>(stats.mu.size()) != H || static_cast<int64_t>(stats.sigma.size()) != H) {
    throw ShapeError("normalize_states: statistics width mismatch");
  }
  for (size_t i = 0; i < states.size(); ++i) {
    const size_t c = i % static_cast<size_t>(H);
    states[i] = (states[i] - stats.mu[c]) / stats.sigma[c];
  }
}

void denormalize_states(std::vector<real>& states, const StateStats& stats, int64_t H) {
  if (static_cast<int64_t>(stats.mu.size()) != H || static_cast<int64_t>(stats.sigma.size()) != H) {
    throw ShapeError("denormalize_states: statistics width mismatch");
  }
  for (size_t i = 0; i < states.size(); ++i) {
    const size_t c = i % static_cast<size_t>(H);
    states[i] = states[i] * stats.sigma[c] + stats.mu[c];
  }
}

Tensor loss_mse(const Tensor& eps_pred, const Tensor& eps_true, const std::vector<uint8_t>& mask,
                bool l1) {
  check_rank3(eps_pred, "loss_mse: prediction");
  if (eps_pred.shape() != eps_true.shape()) {
    throw ShapeError("loss_mse: prediction and target shapes differ");
  }
  return masked_mean_error(sub(eps_pred, eps_true), invalid_of(mask, eps_pred.shape()[0]), l1);
}

Tensor loss_smooth_aug(const Tensor& eps_pred, const Tensor& eps_true_aug,
                       const std::vector<uint8_t>& mask, bool l1) {
  check_rank3(eps_pred, "loss_smooth: prediction");
  if (eps_pred.shape() != eps_true_aug.shape()) {
    throw ShapeError("loss_smooth: prediction and target shapes differ");
  }
  const int64_t H2 = eps_pred.shape()[2];
  if (H2 % 2 != 0) throw ShapeError("loss_smooth: channel extent must be even");
  const int64_t H = H2 / 2;
  const Tensor pd = sub(slice_last_axis(eps_pred, H, H2), slice_last_axis(eps_pred, 0, H));
  const Tensor td = sub(slice_last_axis(eps_true_aug, H, H2), slice_last_axis(eps_true_aug, 0, H));
  return masked_mean_error(sub(pd, td), invalid_of(mask, eps_pred.shape()[0]), l1);
}

Tensor loss_smooth(const Tensor& eps_pred, const Tensor& eps_true_base,
                   const std::vector<uint8_t>& mask, bool l1) {
  check_rank3(eps_pred, "loss_smooth: prediction");
  check_rank3(eps_true_base, "loss_smooth: base noise");
  const Shape& bs = eps_true_base.shape();
  const Shape want{bs[0], bs[1] - 1, bs[2] * 2};
  if (eps_pred.shape() != want) {
    throw ShapeError("loss_smooth: prediction shape does not match the augmented base noise");
  }
  const std::vector<real> aug = augment_noise(eps_true_base.data(), bs[0], bs[1], bs[2]);
  return loss_smooth_aug(eps_pred, Tensor::from_data(want, aug), mask, l1);
}

Tensor loss_hybrid(const Tensor& mse_term, const Tensor& smooth_term, real lambda) {
  if (lambda < 0) throw ValidationError("loss_hybrid: negative smoothness weight");
  return add(mse_term, scalar_mul(smooth_term, lambda));
}

std::string train_meta_to_json(const TrainMeta& meta) {
  nlohmann::json j;
  j["denoiser"] = nlohmann::json::parse(denoiser_to_json(meta.denoiser));
  j["schedule"] = {{"kind", meta.schedule.kind},
                   {"K", meta.schedule.K},
                   {"beta_min", meta.schedule.beta_min},
                   {"beta_max", meta.schedule.beta_max}};
  j["norm"] = {{"mu", meta.stats.mu}, {"sigma", meta.stats.sigma}};
  j["config_hash"] = meta.config_hash;
  j["trained_steps"] = meta.trained_steps;
  return j.dump();
}

TrainMeta train_meta_from_json(const std::string& meta_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  for (const char* key : {"denoiser", "schedule", "norm", "config_hash", "trained_steps"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("checkpoint metadata lacks the '") + key + "' section");
    }
  }
  TrainMeta meta;
  try {
    meta.denoiser = denoiser_from_json(j.at("denoiser").dump());
    const nlohmann::json& s = j.at("schedule");
    meta.schedule.kind = s.at("kind").get<std::string>();
    meta.schedule.K = s.at("K").get<int64_t>();
    meta.schedule.beta_min = s.at("beta_min").get<real>();
    meta.schedule.beta_max = s.at("beta_max").get<real>();
    meta.stats.mu = j.at("norm").at("mu").get<std::vector<real>>();
    meta.stats.sigma = j.at("norm").at("sigma").get<std::vector<real>>();
    meta.config_hash = j.at("config_hash").get<std::string>();
    meta.trained_steps = j.at("trained_steps").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint metadata malformed: ") + e.what());
  }
  if (meta.stats.mu.size() != meta.stats.sigma.size() ||
      static_cast<int64_t>(meta.stats.mu.size()) != meta.denoiser.H) {
    throw ValidationError("checkpoint metadata: normalization width does not match the state width");
  }
  (void)schedule_kind_from_string(meta.schedule.kind);
  return meta;
}

TrainResult train_model(const std::vector<SceneData>& dataset, const RunConfig& cfg,
                        int64_t checkpoint_every, const CheckpointHook& hook) {
  if (dataset.empty()) throw ValidationError("train: empty scenario collection");
  const DenoiserConfig& dc = cfg.denoiser;
  const TrainConfig& tc = cfg.train;
  const NoiseSchedule sched = make_schedule(schedule_kind_from_string(cfg.schedule.kind),
                                            cfg.schedule.K, cfg.schedule.beta_min,
                                            cfg.schedule.beta_max);

  const StateStats stats = compute_state_stats(dataset, dc);
  struct Prepared {
    SceneFeatures features;
    std::vector<real> states;  // normalized, n x T x H
    int64_t n = 0;
  };
  std::vector<Prepared> prep;
  prep.reserve(dataset.size());
  for (const SceneData& s : dataset) {
    Prepared p;
    p.features = extract_features(s, dc);
    p.states = scene_states(s, dc);
    normalize_states(p.states, stats, dc.H);
    p.n = p.features.n;
    prep.push_back(std::move(p));
  }

  Model model(dc, split_seed(cfg.seed, 0x7261696eULL));
  Rng rng(split_seed(cfg.seed, 0x6261746dULL));
  std::vector<Tensor> flat;
  for (auto& [name, p] : model.parameters()) flat.push_back(p);
  AdamState adam;
  AdamConfig adam_cfg;

  const int64_t decay_every =
      std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<real>(tc.steps) *
                                                           tc.lr_decay_frac)));
  const int64_t n_scenes = static_cast<int64_t>(prep.size());
  const int64_t Tm = model.tokens();
  const int64_t C = model.channels();

  auto snapshot = [&](int64_t done) {
    TrainMeta meta;
    meta.denoiser = dc;
    meta.schedule = cfg.schedule;
    meta.stats = stats;
    meta.config_hash = config_hash(cfg);
    meta.trained_steps = done;
    nlohmann::json extra = nlohmann::json::parse(train_meta_to_json(meta));
    extra.erase("denoiser");  // to_checkpoint re-adds it from the live config
    return model.to_checkpoint(extra.dump());
  };

  TrainResult result;
  result.stats = stats;
  result.history.reserve(static_cast<size_t>(tc.steps));
  for (int64_t step = 1; step <= tc.steps; ++step) {
    const real lr_t = tc.lr * std::pow(tc.lr_decay_factor,
                                       static_cast<real>((step - 1) / decay_every));
    Tensor mse_acc = Tensor::scalar(0);
    Tensor smooth_acc = Tensor::scalar(0);
    for (int64_t b = 0; b < tc.batch_size; ++b) {
      const Prepared& p = prep[static_cast<size_t>(rng.uniform_int(0, n_scenes - 1))];
      const int64_t k = rng.uniform_int(1, sched.K);
      std::vector<real> eps0(static_cast<size_t>(p.n * dc.T * dc.H));
      for (real& v : eps0) v = rng.gaussian();

      Tensor s_k, target;
      if (dc.augmented) {
        const std::vector<real> aug0 = augment(p.states, p.n, dc.T, dc.H);
        if (tc.noise_consistent) {
          const std::vector<real> eps_aug = augment_noise(eps0, p.n, dc.T, dc.H);
          s_k = Tensor::from_data({p.n, Tm, C},
                                  diffuse_augmented(aug0, p.n, Tm, C, k, eps_aug, sched));
          target = Tensor::from_data({p.n, Tm, C}, eps_aug);
        } else {
          std::vector<real> eps_ind(static_cast<size_t>(p.n * Tm * C));
          for (real& v : eps_ind) v = rng.gaussian();
          s_k = Tensor::from_data({p.n, Tm, C}, diffuse(aug0, k, eps_ind, sched));
          target = Tensor::from_data({p.n, Tm, C}, eps_ind);
        }
      } else {
        s_k = Tensor::from_data({p.n, Tm, C}, diffuse(p.states, k, eps0, sched));
        target = Tensor::from_data({p.n, Tm, C}, eps0);
      }

      const Tensor cond = model.encode(p.features);
      const Tensor pred = model.denoise(s_k, k, cond);
      mse_acc = add(mse_acc, loss_mse(pred, target, {}, tc.l1));
      if (dc.augmented) {
        smooth_acc = add(smooth_acc, loss_smooth_aug(pred, target, {}, tc.l1));
      }
    }
    const real inv_b = real(1) / static_cast<real>(tc.batch_size);
    const Tensor mse_b = scalar_mul(mse_acc, inv_b);
    const Tensor smooth_b = scalar_mul(smooth_acc, inv_b);
    const Tensor hybrid = loss_hybrid(mse_b, smooth_b, tc.lambda);
    const real loss_value = hybrid.item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("train: loss diverged to a non-finite value at step " +
                         std::to_string(step));
    }
    for (Tensor& p : flat) p.zero_grad();
    backward(hybrid);
    adam_cfg.lr = lr_t;
    adam_step(flat, adam, adam_cfg);

    result.history.push_back({step, mse_b.item(), smooth_b.item(), loss_value, lr_t});
    if (checkpoint_every > 0 && hook && step % checkpoint_every == 0 && step != tc.steps) {
      hook(step, snapshot(step));
    }
  }
  result.checkpoint = snapshot(tc.steps);
  if (hook) hook(tc.steps, result.checkpoint);
  return result;
}

void write_loss_history_csv(const std::string& path, const std::vector<TrainStepLog>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot open loss history for writing: " + path);
  out << "step,L_mse,L_smooth,L_hybrid,lr\n";
  char line[256];
  for (const TrainStepLog& h : history) {
    std::snprintf(line, sizeof line, "%" PRId64 ",%.17g,%.17g,%.17g,%.17g\n", h.step, h.mse,
                  h.smooth, h.hybrid, h.lr);
    out << line;
  }
  if (!out.good()) throw ValidationError("failed while writing loss history: " + path);
}

std::vector<TrainStepLog> read_loss_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open loss history: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "step,L_mse,L_smooth,L_hybrid,lr") {
    throw ValidationError(path + ": missing loss history header");
  }
  std::vector<TrainStepLog> history;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TrainStepLog h;
    std::istringstream ss(line);
    char c1, c2, c3, c4;
    if (!(ss >> h.step >> c1 >> h.mse >> c2 >> h.smooth >> c3 >> h.hybrid >> c4 >> h.lr) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed loss history row");
    }
    history.push_back(h);
  }
  return history;
}

}  // namespace scenediff
