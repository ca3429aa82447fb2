#include "scenediff/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace scenediff {

real penetration_depth(const OrientedBox& a, const OrientedBox& b) {
  const real dx = b.cx - a.cx;
  const real dy = b.cy - a.cy;
  // Face normals of both rectangles (long axis and its perpendicular).
  const real axes[4][2] = {
      {std::cos(a.heading), std::sin(a.heading)},
      {-std::sin(a.heading), std::cos(a.heading)},
      {std::cos(b.heading), std::sin(b.heading)},
      {-std::sin(b.heading), std::cos(b.heading)},
  };
  real depth = std::numeric_limits<real>::infinity();
  for (const auto& u : axes) {
    const real ra = real(0.5) * (a.length * std::abs(std::cos(a.heading) * u[0] + std::sin(a.heading) * u[1]) +
                                 a.width * std::abs(-std::sin(a.heading) * u[0] + std::cos(a.heading) * u[1]));
    const real rb = real(0.5) * (b.length * std::abs(std::cos(b.heading) * u[0] + std::sin(b.heading) * u[1]) +
                                 b.width * std::abs(-std::sin(b.heading) * u[0] + std::cos(b.heading) * u[1]));
    const real dist = std::abs(dx * u[0] + dy * u[1]);
    depth = std::min(depth, ra + rb - dist);
  }
  return depth;
}

real point_to_polyline(real px, real py, const Polyline& line) {
  if (line.points.empty()) return std::numeric_limits<real>::infinity();
  if (line.points.size() == 1) {
    return std::hypot(px - line.points[0][0], py - line.points[0][1]);
  }
  real best = std::numeric_limits<real>::infinity();
  for (size_t i = 0; i + 1 < line.points.size(); ++i) {
    const real ax = line.points[i][0], ay = line.points[i][1];
    const real bx = line.points[i + 1][0], by = line.points[i + 1][1];
    const real ux = bx - ax, uy = by - ay;
    const real len2 = ux * ux + uy * uy;
    real t = len2 > 0 ? ((px - ax) * ux + (py - ay) * uy) / len2 : real(0);
    t = std::clamp(t, real(0), real(1));
    best = std::min(best, std::hypot(px - (ax + t * ux), py - (ay + t * uy)));
  }
  return best;
}

int64_t count_collisions(size_t agent, const std::vector<PoseTrack>& tracks,
                         const std::vector<std::array<real, 2>>& sizes,
                         const std::vector<uint8_t>& valid, bool count_episodes) {
  if (tracks.size() != sizes.size() || tracks.size() != valid.size()) {
    throw ShapeError("count_collisions: tracks, sizes, and validity must align");
  }
  if (agent >= tracks.size() || !valid[agent]) return 0;
  const PoseTrack& mine = tracks[agent];
  const size_t T = mine.x.size();
  const real my_radius = real(0.5) * std::hypot(sizes[agent][0], sizes[agent][1]);
  int64_t count = 0;
  bool in_episode = false;
  for (size_t t = 0; t < T; ++t) {
    bool hit = false;
    for (size_t j = 0; j < tracks.size() && !hit; ++j) {
      if (j == agent || !valid[j]) continue;
      if (tracks[j].x.size() != T) {
        throw ShapeError("count_collisions: tracks are not time-aligned");
      }
      // Circumscribed-circle prefilter before the exact axis test.
      const real other_radius = real(0.5) * std::hypot(sizes[j][0], sizes[j][1]);
      const real cdx = tracks[j].x[t] - mine.x[t];
      const real cdy = tracks[j].y[t] - mine.y[t];
      if (cdx * cdx + cdy * cdy > (my_radius + other_radius) * (my_radius + other_radius)) {
        continue;
      }
      OrientedBox bi{mine.x[t], mine.y[t], mine.heading[t], sizes[agent][0], sizes[agent][1]};
      OrientedBox bj{tracks[j].x[t], tracks[j].y[t], tracks[j].heading[t], sizes[j][0],
                     sizes[j][1]};
      hit = penetration_depth(bi, bj) > 0;
    }
    if (count_episodes) {
      if (hit && !in_episode) ++count;
      in_episode = hit;
    } else if (hit) {
      ++count;
    }
  }
  return count;
}

int64_t count_offroad(const PoseTrack& traj, const std::vector<Polyline>& road,
                      bool count_episodes) {
  int64_t count = 0;
  bool in_episode = false;
  for (size_t t = 0; t < traj.x.size(); ++t) {
    bool off = true;
    for (const Polyline& line : road) {
      if (point_to_polyline(traj.x[t], traj.y[t], line) <= line.width / 2) {
        off = false;
        break;
      }
    }
    if (count_episodes) {
      if (off && !in_episode) ++count;
      in_episode = off;
    } else if (off) {
      ++count;
    }
  }
  return count;
}

real score_scene(const std::vector<TrajectoryScore>& per_agent,
                 const std::vector<uint8_t>& valid) {
  if (per_agent.size() != valid.size()) {
    throw ShapeError("score_scene: scores and validity must align");
  }
  int64_t n = 0;
  int64_t total = 0;
  for (size_t i = 0; i < per_agent.size(); ++i) {
    if (!valid[i]) continue;
    total += per_agent[i].f();
    ++n;
  }
  if (n == 0) throw ValidationError("score_scene: no valid agents");
  return static_cast<real>(total) / static_cast<real>(n);
}

std::vector<size_t> filter_rollouts(const std::vector<real>& scene_scores, size_t keep) {
  if (keep > scene_scores.size()) {
    throw ValidationError("filter_rollouts: asked to keep " + std::to_string(keep) +
                          " of " + std::to_string(scene_scores.size()));
  }
  std::vector<size_t> order(scene_scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scene_scores[a] < scene_scores[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace scenediff
