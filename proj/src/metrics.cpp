#include "scenediff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace scenediff {

namespace {

constexpr real kTwoPi = 6.283185307179586476925286766559;

real wrap_angle(real d) { return std::remainder(d, kTwoPi); }

std::vector<int64_t> histogram_counts(const std::vector<real>& samples,
                                      const HistogramSpec& spec) {
  std::vector<int64_t> counts(static_cast<size_t>(spec.bins) + 2, 0);
  for (real v : samples) ++counts[static_cast<size_t>(bin_index(v, spec))];
  return counts;
}

}  // namespace

int64_t bin_index(real v, const HistogramSpec& spec) {
  if (!(v >= spec.lo)) return 0;
  if (!(v < spec.hi)) return spec.bins + 1;
  const real frac = (v - spec.lo) / (spec.hi - spec.lo);
  const int64_t b = static_cast<int64_t>(frac * static_cast<real>(spec.bins));
  return 1 + std::clamp<int64_t>(b, 0, spec.bins - 1);
}

real likelihood_score(const std::vector<real>& generated, const std::vector<real>& reference,
                      const HistogramSpec& spec) {
  if (generated.empty() || reference.empty()) {
    throw ValidationError("likelihood_score: empty sample set");
  }
  if (!(spec.hi > spec.lo) || spec.bins < 1) {
    throw ValidationError("likelihood_score: bad histogram spec");
  }
  const auto counts = histogram_counts(generated, spec);
  const real cells = static_cast<real>(spec.bins + 2);
  const real denom = static_cast<real>(generated.size()) + cells;  // add-one smoothing
  real nll = 0;
  for (real v : reference) {
    const real p = (static_cast<real>(counts[static_cast<size_t>(bin_index(v, spec))]) + 1) /
                   denom;
    nll -= std::log(p);
  }
  return std::exp(-nll / static_cast<real>(reference.size()));
}

real entropy_bound(const std::vector<real>& reference, const HistogramSpec& spec) {
  if (reference.empty()) throw ValidationError("entropy_bound: empty reference");
  const auto counts = histogram_counts(reference, spec);
  const real n = static_cast<real>(reference.size());
  real h = 0;
  for (int64_t c : counts) {
    if (c == 0) continue;
    const real q = static_cast<real>(c) / n;
    h -= q * std::log(q);
  }
  return std::exp(-h);
}

real max_achievable_score(const std::vector<real>& reference, size_t n_generated,
                          const HistogramSpec& spec) {
  if (n_generated == 0) throw ValidationError("max_achievable_score: empty ensemble");
  const auto counts = histogram_counts(reference, spec);
  int64_t support = 0;
  for (int64_t c : counts) support += (c > 0);
  const real n = static_cast<real>(n_generated);
  const real cells = static_cast<real>(spec.bins + 2);
  return entropy_bound(reference, spec) * (n + static_cast<real>(support)) / (n + cells);
}

KinematicFeatures kinematic_features(const std::vector<PoseState>& poses,
                                     const PoseState& anchor, real dt) {
  KinematicFeatures f;
  const size_t T = poses.size();
  f.speed.reserve(T);
  for (const PoseState& p : poses) f.speed.push_back(std::abs(p.speed));
  for (size_t t = 0; t + 1 < T; ++t) {
    f.accel.push_back((f.speed[t + 1] - f.speed[t]) / dt);
  }
  real prev_heading = anchor.heading;
  for (const PoseState& p : poses) {
    f.ang_speed.push_back(wrap_angle(p.heading - prev_heading) / dt);
    prev_heading = p.heading;
  }
  for (size_t t = 0; t + 1 < T; ++t) {
    f.ang_accel.push_back((f.ang_speed[t + 1] - f.ang_speed[t]) / dt);
  }
  return f;
}

namespace {

// Shared feature extraction for one joint future (either the ground-truth
// futures or one rollout), given the owning scene for anchors and the map.
void pool_joint_future(const SceneData& scene,
                       const std::vector<std::vector<PoseState>>& agent_poses,
                       FeaturePools& out) {
  const size_t n = agent_poses.size();
  if (n != scene.agents.size()) {
    throw ValidationError("evaluate: rollout agent count does not match scene '" +
                          scene.scene_id + "'");
  }
  std::vector<PoseTrack> tracks(n);
  std::vector<std::array<real, 2>> sizes(n);
  std::vector<uint8_t> valid(n, 1);
  for (size_t i = 0; i < n; ++i) {
    if (agent_poses[i].size() < 2) {
      throw ValidationError("evaluate: need at least two future ticks");
    }
    for (const PoseState& p : agent_poses[i]) {
      tracks[i].x.push_back(p.x);
      tracks[i].y.push_back(p.y);
      tracks[i].heading.push_back(p.heading);
    }
    sizes[i] = {scene.agents[i].length, scene.agents[i].width};
  }
  const size_t T = agent_poses[0].size();
  for (size_t i = 0; i < n; ++i) {
    if (agent_poses[i].size() != T) {
      throw ValidationError("evaluate: agents have unequal future lengths");
    }
    const real dt = agent_poses[i][0].t - scene.agents[i].history.back().t;
    if (!(dt > 0)) throw ValidationError("evaluate: future does not follow history");
    const KinematicFeatures kf =
        kinematic_features(agent_poses[i], scene.agents[i].history.back(), dt);
    out.speed.insert(out.speed.end(), kf.speed.begin(), kf.speed.end());
    out.accel.insert(out.accel.end(), kf.accel.begin(), kf.accel.end());
    out.ang_speed.insert(out.ang_speed.end(), kf.ang_speed.begin(), kf.ang_speed.end());
    out.ang_accel.insert(out.ang_accel.end(), kf.ang_accel.begin(), kf.ang_accel.end());

    if (n > 1) {
      for (size_t t = 0; t < T; ++t) {
        real best = std::numeric_limits<real>::infinity();
        for (size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          best = std::min(best, std::hypot(tracks[i].x[t] - tracks[j].x[t],
                                           tracks[i].y[t] - tracks[j].y[t]));
        }
        out.dist_obj.push_back(best);
      }
    }
    const int64_t r1 = count_collisions(i, tracks, sizes, valid);
    const int64_t r2 = count_offroad(tracks[i], scene.map);
    for (size_t t = 0; t < T; ++t) {
      out.collision.push_back(t < static_cast<size_t>(r1) ? 1.0 : 0.0);
      out.offroad.push_back(t < static_cast<size_t>(r2) ? 1.0 : 0.0);
    }
    for (size_t t = 0; t < T; ++t) {
      real best = -std::numeric_limits<real>::infinity();
      for (const Polyline& line : scene.map) {
        best = std::max(best, line.width / 2 -
                                  point_to_polyline(tracks[i].x[t], tracks[i].y[t], line));
      }
      if (scene.map.empty()) best = -8;
      out.dist_edge.push_back(best);
    }
  }
}

const SceneData& find_scene(const std::vector<SceneData>& scenes, const std::string& id) {
  for (const SceneData& s : scenes) {
    if (s.scene_id == id) return s;
  }
  throw ValidationError("evaluate: rollouts reference unknown scene '" + id + "'");
}

}  // namespace

FeaturePools reference_features(const std::vector<SceneData>& scenes) {
  FeaturePools out;
  for (const SceneData& s : scenes) {
    std::vector<std::vector<PoseState>> futures;
    for (const AgentTrack& a : s.agents) {
      if (a.future.size() < 2) {
        throw ValidationError("evaluate: scene '" + s.scene_id + "' lacks ground-truth future");
      }
      futures.push_back(a.future);
    }
    pool_joint_future(s, futures, out);
  }
  return out;
}

FeaturePools generated_features(const std::vector<SceneData>& scenes,
                                const std::vector<SceneRollouts>& rollouts) {
  FeaturePools out;
  for (const SceneRollouts& sr : rollouts) {
    const SceneData& scene = find_scene(scenes, sr.scene_id);
    for (const Rollout& r : sr.rollouts) pool_joint_future(scene, r.agent_poses, out);
  }
  return out;
}

HistogramSpec spec_for(const std::string& feature, int64_t bins) {
  if (feature == "linear_speed") return {0, 15, bins};
  if (feature == "linear_accel") return {-8, 8, bins};
  if (feature == "angular_speed") return {-1, 1, bins};
  if (feature == "angular_accel") return {-2, 2, bins};
  if (feature == "dist_to_object") return {0, 30, bins};
  if (feature == "dist_to_roadedge") return {-8, 8, bins};
  if (feature == "collision_rate" || feature == "offroad_rate") return {-0.5, 1.5, 2};
  throw ValidationError("unknown metric feature '" + feature + "'");
}

MetricReport evaluate(const std::vector<SceneData>& scenes,
                      const std::vector<SceneRollouts>& rollouts, const MetricsConfig& cfg) {
  if (scenes.empty() || rollouts.empty()) {
    throw ValidationError("evaluate: need scenes and rollouts");
  }
  const FeaturePools ref = reference_features(scenes);
  const FeaturePools gen = generated_features(scenes, rollouts);
  auto score = [&](const std::vector<real>& g, const std::vector<real>& r,
                   const char* feature) {
    if (g.empty() && r.empty()) return real(1);  // no evidence either way
    return likelihood_score(g, r, spec_for(feature, cfg.bins));
  };
  MetricReport rep;
  rep.linear_speed = score(gen.speed, ref.speed, "linear_speed");
  rep.linear_accel = score(gen.accel, ref.accel, "linear_accel");
  rep.angular_speed = score(gen.ang_speed, ref.ang_speed, "angular_speed");
  rep.angular_accel = score(gen.ang_accel, ref.ang_accel, "angular_accel");
  rep.dist_to_object = score(gen.dist_obj, ref.dist_obj, "dist_to_object");
  rep.collision_rate = score(gen.collision, ref.collision, "collision_rate");
  rep.dist_to_roadedge = score(gen.dist_edge, ref.dist_edge, "dist_to_roadedge");
  rep.offroad_rate = score(gen.offroad, ref.offroad, "offroad_rate");
  rep.kinematic =
      (rep.linear_speed + rep.linear_accel + rep.angular_speed + rep.angular_accel) / 4;
  rep.interactive = (rep.dist_to_object + rep.collision_rate) / 2;
  rep.map_based = (rep.dist_to_roadedge + rep.offroad_rate) / 2;
  rep.aggregate = (rep.kinematic + rep.interactive + rep.map_based) / 3;
  return rep;
}

real jerk_metric(const std::vector<SceneRollouts>& rollouts) {
  real total = 0;
  int64_t count = 0;
  for (const SceneRollouts& sr : rollouts) {
    for (const Rollout& r : sr.rollouts) {
      for (const auto& poses : r.agent_poses) {
        if (poses.size() < 3) continue;
        const real dt = poses[1].t - poses[0].t;
        if (!(dt > 0)) throw ValidationError("jerk_metric: non-increasing ticks");
        real prev_accel = 0;
        for (size_t t = 0; t + 1 < poses.size(); ++t) {
          const real a = (std::abs(poses[t + 1].speed) - std::abs(poses[t].speed)) / dt;
          if (t > 0) {
            total += std::abs(a - prev_accel) / dt;
            ++count;
          }
          prev_accel = a;
        }
      }
    }
  }
  if (count == 0) throw ValidationError("jerk_metric: no rollouts with enough ticks");
  return total / static_cast<real>(count);
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["linear_speed"] = r.linear_speed;
  j["linear_accel"] = r.linear_accel;
  j["angular_speed"] = r.angular_speed;
  j["angular_accel"] = r.angular_accel;
  j["dist_to_object"] = r.dist_to_object;
  j["collision_rate"] = r.collision_rate;
  j["dist_to_roadedge"] = r.dist_to_roadedge;
  j["offroad_rate"] = r.offroad_rate;
  j["kinematic"] = r.kinematic;
  j["interactive"] = r.interactive;
  j["map_based"] = r.map_based;
  j["aggregate"] = r.aggregate;
  return j.dump();
}

std::string report_csv_header() { return "label,kinematic,interactive,map,realism"; }

std::string report_to_csv_row(const MetricReport& r, const std::string& label) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << label << ',' << r.kinematic << ',' << r.interactive << ','
     << r.map_based << ',' << r.aggregate;
  return ss.str();
}

}  // namespace scenediff
