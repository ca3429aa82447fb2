// Conditional noise-prediction model. A scene encoder maps each agent's
// observed history, type, box, and nearby lane geometry to a condition
// vector; the denoiser embeds noisy state sequences and the diffusion step,
// fuses the condition, and runs alternating temporal / cross-agent attention
// blocks to predict the injected noise.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scenediff/checkpoint.hpp"
#include "scenediff/config.hpp"
#include "scenediff/scenario.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

// Points each polyline is resampled to before the shared point encoder.
constexpr int64_t kMapPoints = 8;

// Pre-MLP sinusoidal position code: index 2i -> sin(k * w_i), 2i+1 ->
// cos(k * w_i). At k=0 this is exactly [0, 1, 0, 1, ...].
std::vector<real> sinusoidal_embedding(real k, int64_t D);

// Plain-data encoder inputs extracted from one scene (no autodiff graph).
struct SceneFeatures {
  int64_t n = 0;            // agents
  int64_t F = 0;            // per-agent feature width
  std::vector<real> agent;  // n x F: history poses, type one-hot, box extents
  std::vector<real> map_pts;          // n x A x kMapPoints x 3 (dx, dy, width)
  std::vector<uint8_t> poly_valid;    // n x A
};

SceneFeatures extract_features(const SceneData& scene, const DenoiserConfig& cfg);

class Model {
 public:
  Model(const DenoiserConfig& cfg, uint64_t seed);

  const DenoiserConfig& config() const { return cfg_; }
  // Sequence layout the denoiser works in.
  int64_t tokens() const { return cfg_.augmented ? cfg_.T - 1 : cfg_.T; }
  int64_t channels() const { return cfg_.augmented ? 2 * cfg_.H : cfg_.H; }

  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  Tensor param(const std::string& name) const;

  // Condition embeddings, one row per agent (masked rows are zero).
  Tensor encode(const SceneFeatures& f, const std::vector<uint8_t>& mask = {}) const;

  // S_k: {n, tokens, channels}; cond: {n, D}. Returns predicted noise of
  // S_k's shape; masked agents get zero output and are invisible as keys.
  Tensor denoise(const Tensor& S_k, int64_t k, const Tensor& cond,
                 const std::vector<uint8_t>& mask = {}) const;

  // extra_meta (JSON object text or empty) is merged with the model config.
  Checkpoint to_checkpoint(const std::string& extra_meta = "") const;
  static Model from_checkpoint(const Checkpoint& ckpt);

 private:
  Tensor add_param(const std::string& name, Shape shape, Rng& rng, real scale);
  Tensor attention(const Tensor& x, const std::string& prefix, int64_t n,
                   const std::vector<uint8_t>& mask, bool temporal) const;

  DenoiserConfig cfg_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace scenediff
