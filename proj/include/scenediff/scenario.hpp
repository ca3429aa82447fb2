// Scenario and rollout data model: JSONL file formats, scene-centric frame
// handling, and the synthetic scene generator (straight roads, lane changes,
// intersections with turning traffic).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenediff/scoring.hpp"

namespace scenediff {

enum class AgentType { vehicle, pedestrian, bicycle };

AgentType agent_type_from_string(const std::string& s);
std::string to_string(AgentType t);

struct PoseState {
  real t = 0;  // seconds; uniform ticks
  real x = 0, y = 0;
  real heading = 0;  // radians
  real speed = 0;    // m/s
};

struct AgentTrack {
  AgentType type = AgentType::vehicle;
  real length = 4.5, width = 2.0;
  std::vector<PoseState> history;  // oldest first; last entry is the current pose
  std::vector<PoseState> future;   // optional ground truth, contiguous with history
};

struct SceneData {
  std::string scene_id;
  std::vector<Polyline> map;
  std::vector<AgentTrack> agents;
  int64_t ego_index = 0;  // frame anchor (not serialized; generator uses agent 0)
};

// One sampled joint future for all agents of a scene.
struct Rollout {
  int64_t rollout_id = 0;
  std::vector<std::vector<PoseState>> agent_poses;  // N x T, aligned with scene agents
};

struct SceneRollouts {
  std::string scene_id;
  std::string config_hash;      // hex
  std::string checkpoint_hash;  // hex
  std::vector<Rollout> rollouts;
};

// --- JSONL ------------------------------------------------------------------

std::string scene_to_json(const SceneData& scene);
SceneData scene_from_json(const std::string& line);
std::vector<SceneData> read_scenario_file(const std::string& path);
void write_scenario_file(const std::string& path, const std::vector<SceneData>& scenes);

// One line per (scene, rollout); lines carry the config/checkpoint hashes.
std::vector<SceneRollouts> read_rollout_file(const std::string& path);
void write_rollout_file(const std::string& path, const std::vector<SceneRollouts>& all);

// --- frame ------------------------------------------------------------------

// Rigidly transforms map and agents so the ego agent's current pose lands at
// the origin facing +x.
void recenter_scene(SceneData& scene);

// --- generator ---------------------------------------------------------------

struct GenSpec {
  int64_t n_scenes = 200;
  int64_t agents_min = 2;
  int64_t agents_max = 6;
  std::vector<std::string> map_kinds = {"straight", "lane-change", "intersection"};
  real dt = 0.5;
  int64_t T_hist = 3;  // ticks including the current pose
  int64_t T_fut = 16;
  uint64_t seed = 0;
};

// Deterministic synthetic scenes: agents follow lane centerlines (straights,
// cosine-windowed lane changes, constant-curvature turns), are spawned
// collision-free, and verify as 0 collisions / 0 offroad under scoring.
std::vector<SceneData> gen_data(const GenSpec& spec);

}  // namespace scenediff
