// Hybrid denoising objective (reconstruction + overlap-smoothness) and the
// optimization loop that fits the scene model to a scenario collection.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scenediff/checkpoint.hpp"
#include "scenediff/config.hpp"
#include "scenediff/model.hpp"
#include "scenediff/scenario.hpp"
#include "scenediff/schedule.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

// Per-channel z-normalization statistics for the velocity states.
struct StateStats {
  std::vector<real> mu;     // H entries
  std::vector<real> sigma;  // H entries, floored away from zero
};

// Velocity states for one scene, flattened n x T x H with H = (vx, vy, yaw
// rate). Derived from the stored future poses by first differences against
// the last observed pose; dt comes from the pose timestamps.
std::vector<real> scene_states(const SceneData& scene, const DenoiserConfig& cfg);

StateStats compute_state_stats(const std::vector<SceneData>& scenes, const DenoiserConfig& cfg);

void normalize_states(std::vector<real>& states, const StateStats& stats, int64_t H);
void denormalize_states(std::vector<real>& states, const StateStats& stats, int64_t H);

// Mean squared (or absolute, with l1) error over the unmasked agents' scalars.
// Shapes must match exactly; an all-masked batch is rejected.
Tensor loss_mse(const Tensor& eps_pred, const Tensor& eps_true, const std::vector<uint8_t>& mask,
                bool l1 = false);

// Error between the prediction's rear-minus-front half differences and the
// same differences of the target noise. With an overlap-consistent target the
// latter are exactly the base noise's per-step increments.
Tensor loss_smooth_aug(const Tensor& eps_pred, const Tensor& eps_true_aug,
                       const std::vector<uint8_t>& mask, bool l1 = false);

// Convenience form taking the base (pre-augmentation) noise n x T x H.
Tensor loss_smooth(const Tensor& eps_pred, const Tensor& eps_true_base,
                   const std::vector<uint8_t>& mask, bool l1 = false);

Tensor loss_hybrid(const Tensor& mse_term, const Tensor& smooth_term, real lambda);

struct TrainStepLog {
  int64_t step = 0;  // 1-based
  real mse = 0;
  real smooth = 0;
  real hybrid = 0;
  real lr = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainStepLog> history;
  StateStats stats;
};

// Invoked with (completed steps, checkpoint); the checkpoint aliases live
// parameters, so serialize inside the callback if a snapshot is wanted.
using CheckpointHook = std::function<void(int64_t, const Checkpoint&)>;

// Runs cfg.train.steps optimization steps. Per step: draw a batch of scenes,
// per scene a uniform step index k in [1, K] and base noise, build the noisy
// augmented states, denoise, average the hybrid loss over the batch, and take
// an adam step under the step-decayed learning rate. Deterministic in
// cfg.seed. Aborts with NumericError if the loss leaves the finite range.
TrainResult train_model(const std::vector<SceneData>& dataset, const RunConfig& cfg,
                        int64_t checkpoint_every = 0, const CheckpointHook& hook = {});

void write_loss_history_csv(const std::string& path, const std::vector<TrainStepLog>& history);
std::vector<TrainStepLog> read_loss_history_csv(const std::string& path);

// Checkpoint metadata bundle written by train_model and consumed by sampling
// and evaluation.
struct TrainMeta {
  DenoiserConfig denoiser;
  ScheduleConfig schedule;
  StateStats stats;
  std::string config_hash;
  int64_t trained_steps = 0;
};

std::string train_meta_to_json(const TrainMeta& meta);
TrainMeta train_meta_from_json(const std::string& meta_json);

}  // namespace scenediff
