// Scene-level plausibility scoring: separating-axis collision depth between
// oriented boxes, per-trajectory collision/offroad step counts, their sum as
// the trajectory score, scene averaging, and best-of filtering of rollouts.
// Lower scores indicate more compliant scenes.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "scenediff/common.hpp"

namespace scenediff {

struct OrientedBox {
  real cx = 0, cy = 0;  // center, meters
  real heading = 0;     // radians
  real length = 1, width = 1;
};

struct Polyline {
  std::vector<std::array<real, 2>> points;
  real width = 4.0;  // full corridor width, meters
};

// Pose sequence of one agent; parallel arrays, one entry per timestep.
struct PoseTrack {
  std::vector<real> x, y, heading;
};

struct TrajectoryScore {
  int64_t r1 = 0;  // timesteps with at least one collision
  int64_t r2 = 0;  // timesteps outside every road corridor
  int64_t f() const { return r1 + r2; }
};

// Separating-axis overlap over the 4 face normals: min over axes of
// (sum of projected half-extents - |center offset . axis|). Positive means
// the boxes collide and the value is the penetration depth; non-positive
// means separated, with magnitude the largest axis gap.
real penetration_depth(const OrientedBox& a, const OrientedBox& b);

// Shortest distance from point (px,py) to the polyline's segment chain.
real point_to_polyline(real px, real py, const Polyline& line);

// Collision-step count for agent i against all other valid agents. sizes[j]
// gives agent j's box footprint; tracks must be time-aligned. When
// count_episodes is true, counts entry events instead of violating steps.
int64_t count_collisions(size_t agent, const std::vector<PoseTrack>& tracks,
                         const std::vector<std::array<real, 2>>& sizes,  // {length, width}
                         const std::vector<uint8_t>& valid, bool count_episodes = false);

// Offroad-step count: steps whose center is farther than width/2 from every
// polyline. An empty road makes every step count.
int64_t count_offroad(const PoseTrack& traj, const std::vector<Polyline>& road,
                      bool count_episodes = false);

// Mean of per-agent f over valid agents; rejects zero valid agents.
real score_scene(const std::vector<TrajectoryScore>& per_agent,
                 const std::vector<uint8_t>& valid);

// Indices (in original order) of the `keep` rollouts with the lowest scene
// scores; ties broken by rollout index.
std::vector<size_t> filter_rollouts(const std::vector<real>& scene_scores, size_t keep);

}  // namespace scenediff
