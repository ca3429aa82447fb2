// Histogram-likelihood evaluation of rollout ensembles against ground truth:
// kinematic, interactive, and map feature families, each scored as
// exp(-mean NLL) of the reference under a Laplace-smoothed histogram fitted to
// the generated samples, plus a jerk smoothness diagnostic.
#pragma once

#include <string>
#include <vector>

#include "scenediff/config.hpp"
#include "scenediff/scenario.hpp"

namespace scenediff {

struct HistogramSpec {
  real lo = 0, hi = 1;
  int64_t bins = 32;  // interior bins; cells = bins + 2 (under/overflow)
};

// Cell index in [0, bins+1]: 0 underflow, bins+1 overflow.
int64_t bin_index(real v, const HistogramSpec& spec);

// exp(-mean_ref log p) with p the add-one smoothed cell distribution of
// `generated`. Rejects empty inputs.
real likelihood_score(const std::vector<real>& generated, const std::vector<real>& reference,
                      const HistogramSpec& spec);

// exp(-H(q)) for the reference's own cell distribution: an upper bound on
// likelihood_score over every possible generated ensemble (Gibbs inequality).
real entropy_bound(const std::vector<real>& reference, const HistogramSpec& spec);

// Tighter bound for a generated ensemble of a given size: smoothing forces
// each of the B cells to mass >= 1/(n+B), so the best reachable score is
// exp(-H(q)) * (n+S)/(n+B) with S the reference support size (continuous
// relaxation; exact for references uniform over their support).
real max_achievable_score(const std::vector<real>& reference, size_t n_generated,
                          const HistogramSpec& spec);

struct KinematicFeatures {
  std::vector<real> speed;      // |v| per tick, length T
  std::vector<real> accel;      // d|v|/dt, length T-1
  std::vector<real> ang_speed;  // wrapped dheading/dt, length T (anchored)
  std::vector<real> ang_accel;  // length T-1
};

// anchor = the pose one tick before poses[0] (the last observed pose).
KinematicFeatures kinematic_features(const std::vector<PoseState>& poses,
                                     const PoseState& anchor, real dt);

// Pooled per-(agent, step) feature samples across scenes and rollouts.
struct FeaturePools {
  std::vector<real> speed, accel, ang_speed, ang_accel;  // kinematic
  std::vector<real> dist_obj, collision;                 // interactive
  std::vector<real> dist_edge, offroad;                  // map
};

FeaturePools reference_features(const std::vector<SceneData>& scenes);
FeaturePools generated_features(const std::vector<SceneData>& scenes,
                                const std::vector<SceneRollouts>& rollouts);

struct MetricReport {
  real linear_speed = 0, linear_accel = 0, angular_speed = 0, angular_accel = 0;
  real dist_to_object = 0, collision_rate = 0;
  real dist_to_roadedge = 0, offroad_rate = 0;
  real kinematic = 0, interactive = 0, map_based = 0;  // family means
  real aggregate = 0;                                  // mean of family means
};

MetricReport evaluate(const std::vector<SceneData>& scenes,
                      const std::vector<SceneRollouts>& rollouts, const MetricsConfig& cfg);

// Mean |a_{t+1} - a_t| / dt over agents and steps: lower is smoother.
real jerk_metric(const std::vector<SceneRollouts>& rollouts);

// Fixed physical ranges per feature; `bins` interior bins (rates use 2).
HistogramSpec spec_for(const std::string& feature, int64_t bins);

std::string report_to_json(const MetricReport& r);
std::string report_csv_header();
std::string report_to_csv_row(const MetricReport& r, const std::string& label);

}  // namespace scenediff
