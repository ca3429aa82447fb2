// Run configuration: one schema-versioned JSON document holding every module's
// knobs plus the master seed. Loading is strict (unknown keys rejected);
// missing keys fall back to desk-scale defaults.
#pragma once

#include <cstdint>
#include <string>

#include "scenediff/scenario.hpp"

namespace scenediff {

struct ScheduleConfig {
  std::string kind = "linear";  // or "cosine"
  int64_t K = 100;
  real beta_min = 1e-4;
  real beta_max = 0.02;
};

struct DenoiserConfig {
  int64_t D = 64;      // model width
  int64_t blocks = 2;  // (temporal attention, agent attention) pairs
  int64_t heads = 4;
  int64_t K = 100;  // diffusion steps the step embedding must cover
  int64_t T = 16;   // future length in ticks
  int64_t T_hist = 3;  // observed ticks fed to the encoder
  int64_t H = 3;    // state channels per tick (vx, vy, yaw rate)
  int64_t N_max = 8;
  int64_t A = 4;  // nearest polylines fed to the encoder
  bool agent_attention = true;  // ablation: cross-agent attention
  bool augmented = true;        // ablation: adjacent-pair sequence augmentation
};

struct TrainConfig {
  real lambda = 1.0;  // smoothness weight
  real lr = 1e-4;
  real lr_decay_factor = 0.5;
  real lr_decay_frac = 0.4;  // decay every this fraction of total steps
  int64_t batch_size = 8;
  int64_t steps = 500;
  bool l1 = false;              // L1 losses instead of squared error
  bool noise_consistent = true; // ablation: shared noise across overlaps
};

struct SamplerConfig {
  int64_t M = 8;  // rollouts per scene
  bool guidance_enabled = true;
  bool guide_states = false;  // average latent states instead of noise
  int64_t stride = 1;         // DDIM step stride (1 = every step)
};

struct ScoringConfig {
  bool count_episodes = false;  // count entry events instead of steps
};

struct MetricsConfig {
  int64_t bins = 32;
};

struct RunConfig {
  int64_t schema_version = 1;
  uint64_t seed = 0;
  GenSpec gen;
  ScheduleConfig schedule;
  DenoiserConfig denoiser;
  TrainConfig train;
  SamplerConfig sampler;
  ScoringConfig scoring;
  MetricsConfig metrics;
};

// Canonical (sorted-key) JSON; parsing rejects unknown keys and bad types.
std::string config_to_json(const RunConfig& cfg, int indent = 2);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

// Cross-field coherence (schema version, ranges, section agreement).
void validate(const RunConfig& cfg);

// FNV-1a digest of the canonical dump; stable across save/load round trips.
std::string config_hash(const RunConfig& cfg);

// Standalone denoiser-section (de)serialization, used in checkpoint metadata.
std::string denoiser_to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_from_json(const std::string& text);

}  // namespace scenediff
