#include "scenediff/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace scenediff {

using nlohmann::json;

AgentType agent_type_from_string(const std::string& s) {
  if (s == "vehicle") return AgentType::vehicle;
  if (s == "pedestrian") return AgentType::pedestrian;
  if (s == "bicycle") return AgentType::bicycle;
  throw ValidationError("unknown agent type '" + s + "'");
}

std::string to_string(AgentType t) {
  switch (t) {
    case AgentType::vehicle: return "vehicle";
    case AgentType::pedestrian: return "pedestrian";
    default: return "bicycle";
  }
}

// --- JSON -------------------------------------------------------------------

namespace {

json pose_to_json(const PoseState& p) {
  return json{{"t", p.t}, {"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"speed", p.speed}};
}

PoseState pose_from_json(const json& j) {
  PoseState p;
  p.t = j.at("t").get<real>();
  p.x = j.at("x").get<real>();
  p.y = j.at("y").get<real>();
  p.heading = j.at("heading").get<real>();
  p.speed = j.at("speed").get<real>();
  for (real v : {p.t, p.x, p.y, p.heading, p.speed}) {
    if (!std::isfinite(v)) throw ValidationError("pose has non-finite value");
  }
  return p;
}

void check_tick_spacing(const AgentTrack& agent) {
  const auto& h = agent.history;
  if (h.empty()) throw ValidationError("agent has empty history");
  real dt = 0;
  if (h.size() >= 2) {
    dt = h[1].t - h[0].t;
    if (dt <= 0) throw ValidationError("history ticks must increase");
    for (size_t i = 1; i < h.size(); ++i) {
      if (std::abs((h[i].t - h[i - 1].t) - dt) > 1e-9) {
        throw ValidationError("history ticks are not uniform");
      }
    }
  }
  const auto& f = agent.future;
  if (!f.empty()) {
    if (h.size() >= 2 && std::abs((f[0].t - h.back().t) - dt) > 1e-9) {
      throw ValidationError("future does not continue history ticks");
    }
    for (size_t i = 1; i < f.size(); ++i) {
      const real step = f[i].t - f[i - 1].t;
      if (step <= 0 || (h.size() >= 2 && std::abs(step - dt) > 1e-9)) {
        throw ValidationError("future ticks are not uniform");
      }
    }
  }
}

}  // namespace

std::string scene_to_json(const SceneData& scene) {
  json j;
  j["scene_id"] = scene.scene_id;
  j["map"] = json::array();
  for (const Polyline& line : scene.map) {
    json points = json::array();
    for (const auto& p : line.points) points.push_back(json::array({p[0], p[1]}));
    j["map"].push_back(json{{"points", std::move(points)}, {"width", line.width}});
  }
  j["agents"] = json::array();
  for (const AgentTrack& a : scene.agents) {
    json agent;
    agent["type"] = to_string(a.type);
    agent["length"] = a.length;
    agent["width"] = a.width;
    agent["history"] = json::array();
    for (const PoseState& p : a.history) agent["history"].push_back(pose_to_json(p));
    if (!a.future.empty()) {
      agent["future"] = json::array();
      for (const PoseState& p : a.future) agent["future"].push_back(pose_to_json(p));
    }
    j["agents"].push_back(std::move(agent));
  }
  return j.dump();
}

SceneData scene_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario line is not valid JSON: ") + e.what());
  }
  try {
    SceneData scene;
    scene.scene_id = j.at("scene_id").get<std::string>();
    for (const json& jl : j.at("map")) {
      Polyline pl;
      pl.width = jl.at("width").get<real>();
      if (!(pl.width > 0) || !std::isfinite(pl.width)) {
        throw ValidationError("polyline width must be positive");
      }
      for (const json& jp : jl.at("points")) {
        if (!jp.is_array() || jp.size() != 2) {
          throw ValidationError("polyline point must be [x, y]");
        }
        const real px = jp[0].get<real>(), py = jp[1].get<real>();
        if (!std::isfinite(px) || !std::isfinite(py)) {
          throw ValidationError("polyline point is non-finite");
        }
        pl.points.push_back({px, py});
      }
      if (pl.points.empty()) throw ValidationError("polyline has no points");
      scene.map.push_back(std::move(pl));
    }
    for (const json& ja : j.at("agents")) {
      AgentTrack a;
      a.type = agent_type_from_string(ja.at("type").get<std::string>());
      a.length = ja.at("length").get<real>();
      a.width = ja.at("width").get<real>();
      if (!(a.length > 0) || !(a.width > 0)) {
        throw ValidationError("agent box extents must be positive");
      }
      for (const json& jp : ja.at("history")) a.history.push_back(pose_from_json(jp));
      if (ja.contains("future")) {
        for (const json& jp : ja.at("future")) a.future.push_back(pose_from_json(jp));
      }
      check_tick_spacing(a);
      scene.agents.push_back(std::move(a));
    }
    if (scene.agents.empty()) throw ValidationError("scene has no agents");
    return scene;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario line missing fields: ") + e.what());
  }
}

std::vector<SceneData> read_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::vector<SceneData> scenes;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      scenes.push_back(scene_from_json(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (scenes.empty()) throw ValidationError("scenario file '" + path + "' has no scenes");
  return scenes;
}

void write_scenario_file(const std::string& path, const std::vector<SceneData>& scenes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write scenario file '" + path + "'");
  for (const SceneData& s : scenes) out << scene_to_json(s) << '\n';
}

std::vector<SceneRollouts> read_rollout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open rollout file '" + path + "'");
  std::vector<SceneRollouts> out;
  std::map<std::string, size_t> index;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      const std::string scene_id = j.at("scene_id").get<std::string>();
      auto [it, fresh] = index.try_emplace(scene_id, out.size());
      if (fresh) {
        out.emplace_back();
        out.back().scene_id = scene_id;
        out.back().config_hash = j.at("config_hash").get<std::string>();
        out.back().checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
      } else {
        if (out[it->second].config_hash != j.at("config_hash").get<std::string>() ||
            out[it->second].checkpoint_hash != j.at("checkpoint_hash").get<std::string>()) {
          throw ValidationError("rollouts of one scene carry different hashes");
        }
      }
      Rollout r;
      r.rollout_id = j.at("rollout_id").get<int64_t>();
      size_t T = 0;
      for (const json& ja : j.at("agents")) {
        std::vector<PoseState> poses;
        for (const json& jp : ja.at("poses")) poses.push_back(pose_from_json(jp));
        if (T == 0) T = poses.size();
        if (poses.size() != T) throw ValidationError("rollout agents have unequal lengths");
        r.agent_poses.push_back(std::move(poses));
      }
      if (r.agent_poses.empty()) throw ValidationError("rollout has no agents");
      out[it->second].rollouts.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": bad rollout line: " +
                            e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ValidationError("rollout file '" + path + "' has no rollouts");
  return out;
}

void write_rollout_file(const std::string& path, const std::vector<SceneRollouts>& all) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write rollout file '" + path + "'");
  for (const SceneRollouts& sr : all) {
    for (const Rollout& r : sr.rollouts) {
      json j;
      j["scene_id"] = sr.scene_id;
      j["rollout_id"] = r.rollout_id;
      j["config_hash"] = sr.config_hash;
      j["checkpoint_hash"] = sr.checkpoint_hash;
      j["agents"] = json::array();
      for (const auto& poses : r.agent_poses) {
        json ja;
        ja["poses"] = json::array();
        for (const PoseState& p : poses) ja["poses"].push_back(pose_to_json(p));
        j["agents"].push_back(std::move(ja));
      }
      out << j.dump() << '\n';
    }
  }
}

// --- frame ------------------------------------------------------------------

void recenter_scene(SceneData& scene) {
  if (scene.agents.empty()) throw ValidationError("recenter: scene has no agents");
  if (scene.ego_index < 0 || scene.ego_index >= static_cast<int64_t>(scene.agents.size())) {
    throw ValidationError("recenter: ego index out of range");
  }
  const AgentTrack& ego = scene.agents[static_cast<size_t>(scene.ego_index)];
  if (ego.history.empty()) throw ValidationError("recenter: ego has no history");
  const PoseState anchor = ego.history.back();
  const real c = std::cos(-anchor.heading), s = std::sin(-anchor.heading);
  auto map_point = [&](real& x, real& y) {
    const real dx = x - anchor.x, dy = y - anchor.y;
    x = c * dx - s * dy;
    y = s * dx + c * dy;
  };
  for (Polyline& line : scene.map) {
    for (auto& p : line.points) map_point(p[0], p[1]);
  }
  for (AgentTrack& a : scene.agents) {
    for (auto* seq : {&a.history, &a.future}) {
      for (PoseState& p : *seq) {
        map_point(p.x, p.y);
        p.heading -= anchor.heading;
      }
    }
  }
}

// --- generator ---------------------------------------------------------------

namespace {

constexpr real kLaneWidth = 4.0;
constexpr real kLaneSpan = 4.0;  // centerline spacing of parallel lanes

struct AgentPlan {
  AgentType type = AgentType::vehicle;
  real length = 4.6, width = 1.9;
  real x0 = 0, y0 = 0, h0 = 0;  // pose at the first history tick
  real v0 = 5, accel = 0;
  // Lane change: raised-cosine heading bump over [lc_start, lc_start+lc_len).
  int64_t lc_start = -1, lc_len = 0;
  real lc_dy = 0;
  // Turn: constant curvature once x crosses the trigger, through |pi/2|.
  bool turn = false;
  real turn_trigger_x = 0, turn_radius = 8, turn_sign = 1;
};

real clamp_speed(real v) { return std::clamp(v, real(0.5), real(13.0)); }

std::vector<PoseState> integrate_plan(const AgentPlan& plan, int64_t ticks, real dt, real t0) {
  std::vector<PoseState> out;
  out.reserve(static_cast<size_t>(ticks));
  out.push_back({t0, plan.x0, plan.y0, plan.h0, clamp_speed(plan.v0)});

  // Heading-bump profile for lane changes; zero outside the window. The value
  // is chosen so the small-angle lateral displacement matches lc_dy.
  std::vector<real> bump(static_cast<size_t>(ticks), real(0));
  if (plan.lc_start >= 0 && plan.lc_len > 0) {
    real weight_sum = 0;
    for (int64_t j = 0; j < plan.lc_len; ++j) {
      const real w = std::sin(real(M_PI) * static_cast<real>(j + 1) /
                              static_cast<real>(plan.lc_len + 1));
      const int64_t i = plan.lc_start + j;
      if (i <= 0 || i >= ticks) continue;
      const real v = clamp_speed(plan.v0 + plan.accel * static_cast<real>(i) * dt);
      bump[static_cast<size_t>(i)] = w * w;
      weight_sum += dt * v * w * w;
    }
    if (weight_sum > 0) {
      const real theta = plan.lc_dy / weight_sum;
      for (auto& b : bump) b *= theta;
    }
  }

  real x = plan.x0, y = plan.y0, h = plan.h0;
  real prev_bump = 0;
  real turned = 0;
  bool turning = false, turn_done = !plan.turn;
  for (int64_t i = 1; i < ticks; ++i) {
    const real v = clamp_speed(plan.v0 + plan.accel * static_cast<real>(i) * dt);
    real omega = (bump[static_cast<size_t>(i)] - prev_bump) / dt;
    prev_bump = bump[static_cast<size_t>(i)];
    if (!turn_done) {
      if (!turning && x >= plan.turn_trigger_x) turning = true;
      if (turning) {
        real w = plan.turn_sign * v / plan.turn_radius;
        const real remaining = plan.turn_sign * (real(M_PI) / 2) - turned;
        if (std::abs(w * dt) >= std::abs(remaining)) {
          w = remaining / dt;  // final partial tick lands exactly on 90 degrees
          turn_done = true;
        }
        turned += w * dt;
        omega += w;
      }
    }
    h += omega * dt;
    x += dt * v * std::cos(h);
    y += dt * v * std::sin(h);
    out.push_back({t0 + static_cast<real>(i) * dt, x, y, h, v});
  }
  return out;
}

Polyline straight_lane(real x_lo, real x_hi, real y, real step = 10) {
  Polyline line;
  line.width = kLaneWidth;
  for (real x = x_lo; x < x_hi + step / 2; x += step) line.points.push_back({x, y});
  return line;
}

Polyline vertical_lane(real y_lo, real y_hi, real x, real step = 10) {
  Polyline line;
  line.width = kLaneWidth;
  for (real y = y_lo; y < y_hi + step / 2; y += step) line.points.push_back({x, y});
  return line;
}

Polyline arc_lane(real cx, real cy, real radius, real theta0, real theta1) {
  Polyline line;
  line.width = kLaneWidth;
  const int steps = 12;
  for (int i = 0; i <= steps; ++i) {
    const real th = theta0 + (theta1 - theta0) * static_cast<real>(i) / steps;
    line.points.push_back({cx + radius * std::cos(th), cy + radius * std::sin(th)});
  }
  return line;
}

struct Candidate {
  std::vector<AgentPlan> plans;
  std::vector<Polyline> map;
};

// Slot grids keep same-route agents longitudinally separated.
std::vector<real> pick_slots(Rng& rng, std::vector<real> grid, size_t n) {
  rng.shuffle(grid);
  grid.resize(std::min(n, grid.size()));
  return grid;
}

Candidate plan_straight(Rng& rng, int64_t n_agents, bool with_lane_change, int64_t T_hist,
                        int64_t T_fut) {
  Candidate cand;
  for (int lane = 0; lane < 3; ++lane) {
    cand.map.push_back(straight_lane(-70, 150, (lane - 1) * kLaneSpan));
  }
  // (lane, x0) slots; same-lane agents share speed and acceleration so gaps
  // stay constant through history and future.
  real lane_speed[3], lane_accel[3];
  for (int lane = 0; lane < 3; ++lane) {
    lane_speed[lane] = rng.uniform(3.0, 9.0);
    lane_accel[lane] = rng.uniform(-0.35, 0.35);
  }
  std::vector<std::pair<int, real>> slots;
  for (int lane = 0; lane < 3; ++lane) {
    for (real x0 : {-55.0, -35.0, -15.0, 5.0, 25.0}) slots.emplace_back(lane, x0);
  }
  rng.shuffle(slots);

  int64_t made = 0;
  size_t cursor = 0;
  if (with_lane_change) {
    const int src = static_cast<int>(rng.uniform_int(0, 1));  // 0->1 or 1->2 region
    const int dst = src + 1;
    AgentPlan changer;
    changer.x0 = rng.uniform(-40.0, -10.0);
    changer.y0 = (src - 1) * kLaneSpan;
    changer.v0 = rng.uniform(4.0, 8.0);
    changer.lc_start = T_hist + rng.uniform_int(1, std::max<int64_t>(1, T_fut - 10));
    changer.lc_len = 8;
    changer.lc_dy = (dst - src) * kLaneSpan;
    cand.plans.push_back(changer);
    ++made;
    // Remaining agents go to the lane the maneuver never touches.
    const int free_lane = (src == 0) ? 2 : 0;
    slots.clear();
    for (real x0 : {-55.0, -35.0, -15.0, 5.0, 25.0}) slots.emplace_back(free_lane, x0);
    rng.shuffle(slots);
  }
  for (; made < n_agents && cursor < slots.size(); ++made, ++cursor) {
    auto [lane, x0] = slots[cursor];
    AgentPlan p;
    p.x0 = x0 + rng.uniform(-2.0, 2.0);
    p.y0 = (lane - 1) * kLaneSpan;
    p.v0 = lane_speed[lane];
    p.accel = lane_accel[lane];
    cand.plans.push_back(p);
  }
  return cand;
}

Candidate plan_intersection(Rng& rng, int64_t n_agents) {
  Candidate cand;
  cand.map.push_back(straight_lane(-70, 150, 0));   // east-west road
  cand.map.push_back(vertical_lane(-70, 150, 0));   // north-south road
  cand.map.push_back(arc_lane(-8, 8, 8, -real(M_PI) / 2, 0));   // left turn EB->NB
  cand.map.push_back(arc_lane(-6, -6, 6, real(M_PI) / 2, 0));   // right turn EB->SB

  // Route 0: eastbound straight; 1: northbound straight; 2: left turn;
  // 3: right turn.
  std::vector<int> routes{0, 1, 2, 3, 0, 1, 0, 1};
  rng.shuffle(routes);
  std::vector<real> eb_slots = pick_slots(rng, {-58, -42, -26, 12}, 4);
  std::vector<real> nb_slots = pick_slots(rng, {-58, -42, -26, 12}, 4);
  std::vector<real> turn_slots = pick_slots(rng, {-52, -34}, 2);
  size_t eb_used = 0, nb_used = 0, turn_used = 0;
  const real eb_speed = rng.uniform(4.0, 8.0);
  const real nb_speed = rng.uniform(4.0, 8.0);

  for (int64_t i = 0; i < n_agents; ++i) {
    const int route = routes[static_cast<size_t>(i) % routes.size()];
    AgentPlan p;
    switch (route) {
      case 0:
        if (eb_used >= eb_slots.size()) continue;
        p.x0 = eb_slots[eb_used++] + rng.uniform(-2.0, 2.0);
        p.y0 = 0;
        p.v0 = eb_speed;
        break;
      case 1: {
        if (nb_used >= nb_slots.size()) continue;
        p.x0 = 0;
        p.y0 = nb_slots[nb_used++] + rng.uniform(-2.0, 2.0);
        p.h0 = real(M_PI) / 2;
        p.v0 = nb_speed;
        break;
      }
      default: {
        if (turn_used >= turn_slots.size()) continue;
        p.x0 = turn_slots[turn_used++] + rng.uniform(-2.0, 2.0);
        p.y0 = 0;
        p.v0 = rng.uniform(4.0, 7.0);
        p.turn = true;
        if (route == 2) {
          p.turn_trigger_x = -8;
          p.turn_radius = 8;
          p.turn_sign = 1;
        } else {
          p.turn_trigger_x = -6;
          p.turn_radius = 6;
          p.turn_sign = -1;
        }
        break;
      }
    }
    cand.plans.push_back(p);
  }
  return cand;
}

void assign_types(Rng& rng, Candidate& cand) {
  for (AgentPlan& p : cand.plans) {
    const bool plain = !p.turn && p.lc_start < 0;
    if (plain && rng.uniform() < 0.15) {
      p.type = AgentType::bicycle;
      p.length = 1.8;
      p.width = 0.6;
      p.v0 = std::min(p.v0, rng.uniform(2.5, 4.5));
      p.accel = 0;
    } else {
      p.length = rng.uniform(4.2, 5.0);
      p.width = rng.uniform(1.8, 2.1);
    }
  }
}

// Bicycles may be slower than the lane speed; keep them rear-most in their
// lane so gaps to leaders only grow forward in time.
bool bicycle_order_ok(const Candidate& cand) {
  for (size_t i = 0; i < cand.plans.size(); ++i) {
    const AgentPlan& b = cand.plans[i];
    if (b.type != AgentType::bicycle) continue;
    for (size_t j = 0; j < cand.plans.size(); ++j) {
      if (i == j) continue;
      const AgentPlan& o = cand.plans[j];
      const bool same_corridor = std::abs(b.y0 - o.y0) < 1.0 && std::abs(b.h0 - o.h0) < 0.1;
      if (same_corridor && o.x0 < b.x0) return false;
    }
  }
  return true;
}

bool scene_is_clean(const SceneData& scene) {
  const size_t n = scene.agents.size();
  std::vector<PoseTrack> tracks(n);
  std::vector<std::array<real, 2>> sizes(n);
  std::vector<uint8_t> valid(n, 1);
  for (size_t i = 0; i < n; ++i) {
    const AgentTrack& a = scene.agents[i];
    for (const auto* seq : {&a.history, &a.future}) {
      for (const PoseState& p : *seq) {
        tracks[i].x.push_back(p.x);
        tracks[i].y.push_back(p.y);
        tracks[i].heading.push_back(p.heading);
      }
    }
    sizes[i] = {a.length, a.width};
  }
  for (size_t i = 0; i < n; ++i) {
    if (count_collisions(i, tracks, sizes, valid) > 0) return false;
    if (count_offroad(tracks[i], scene.map) > 0) return false;
  }
  return true;
}

}  // namespace

std::vector<SceneData> gen_data(const GenSpec& spec) {
  if (spec.n_scenes < 1) throw ValidationError("gen_data: n_scenes must be positive");
  if (spec.agents_min < 1 || spec.agents_max < spec.agents_min) {
    throw ValidationError("gen_data: invalid agent count range");
  }
  if (spec.agents_max > 8) {
    throw ValidationError("gen_data: the map layouts hold at most 8 agents");
  }
  if (!(spec.dt > 0) || spec.T_hist < 1 || spec.T_fut < 2) {
    throw ValidationError("gen_data: need dt > 0, T_hist >= 1, T_fut >= 2");
  }
  if (spec.map_kinds.empty()) throw ValidationError("gen_data: no map kinds");
  for (const std::string& kind : spec.map_kinds) {
    if (kind != "straight" && kind != "lane-change" && kind != "intersection") {
      throw ValidationError("gen_data: unknown map kind '" + kind + "'");
    }
  }

  std::vector<SceneData> scenes;
  scenes.reserve(static_cast<size_t>(spec.n_scenes));
  for (int64_t idx = 0; idx < spec.n_scenes; ++idx) {
    const uint64_t scene_seed = split_seed(spec.seed, static_cast<uint64_t>(idx));
    const std::string kind = spec.map_kinds[static_cast<size_t>(idx) % spec.map_kinds.size()];
    Rng seed_rng(scene_seed);
    int64_t want = seed_rng.uniform_int(spec.agents_min, spec.agents_max);

    SceneData scene;
    bool ok = false;
    for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
      if (attempt > 0 && attempt % 20 == 0 && want > spec.agents_min) --want;
      Rng rng(split_seed(scene_seed, static_cast<uint64_t>(attempt) + 1));
      Candidate cand;
      if (kind == "straight") {
        cand = plan_straight(rng, want, false, spec.T_hist, spec.T_fut);
      } else if (kind == "lane-change") {
        cand = plan_straight(rng, want, true, spec.T_hist, spec.T_fut);
      } else {
        cand = plan_intersection(rng, want);
      }
      if (static_cast<int64_t>(cand.plans.size()) < spec.agents_min) continue;
      assign_types(rng, cand);
      if (!bicycle_order_ok(cand)) continue;

      scene = SceneData{};
      scene.scene_id = "scene_" + std::to_string(idx);
      scene.map = cand.map;
      const int64_t ticks = spec.T_hist + spec.T_fut;
      const real t0 = -static_cast<real>(spec.T_hist - 1) * spec.dt;
      for (const AgentPlan& p : cand.plans) {
        std::vector<PoseState> poses = integrate_plan(p, ticks, spec.dt, t0);
        AgentTrack a;
        a.type = p.type;
        a.length = p.length;
        a.width = p.width;
        a.history.assign(poses.begin(), poses.begin() + spec.T_hist);
        a.future.assign(poses.begin() + spec.T_hist, poses.end());
        scene.agents.push_back(std::move(a));
      }
      scene.ego_index = 0;
      recenter_scene(scene);
      ok = scene_is_clean(scene);
    }
    if (!ok) {
      throw ValidationError("gen_data: could not place " + std::to_string(want) +
                            " agents on map kind '" + kind + "'");
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace scenediff
