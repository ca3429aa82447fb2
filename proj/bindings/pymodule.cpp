// Python surface: the pipeline operations (generate, train, sample, score,
// evaluate) plus the core numeric primitives, file- and list-oriented so no
// C++ types leak through.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "scenediff/augment.hpp"
#include "scenediff/checkpoint.hpp"
#include "scenediff/config.hpp"
#include "scenediff/metrics.hpp"
#include "scenediff/model.hpp"
#include "scenediff/sampler.hpp"
#include "scenediff/scenario.hpp"
#include "scenediff/schedule.hpp"
#include "scenediff/scoring.hpp"
#include "scenediff/train.hpp"

namespace py = pybind11;
using namespace scenediff;

namespace {

RunConfig config_of(const std::string& config_json) {
  RunConfig cfg = config_from_json(config_json);
  validate(cfg);
  return cfg;
}

NoiseSchedule schedule_of(const ScheduleConfig& sc) {
  return make_schedule(schedule_kind_from_string(sc.kind), sc.K, sc.beta_min, sc.beta_max);
}

NoiseSchedule schedule_from_alpha_bar(const std::vector<real>& alpha_bar) {
  if (alpha_bar.size() < 2 || alpha_bar.front() != 1.0) {
    throw ValidationError("alpha_bar must start at 1 and cover at least one step");
  }
  NoiseSchedule s;
  s.K = static_cast<int64_t>(alpha_bar.size()) - 1;
  s.alpha_bar = alpha_bar;
  s.beta.assign(static_cast<size_t>(s.K), 0);
  for (int64_t k = 1; k <= s.K; ++k) {
    s.beta[static_cast<size_t>(k - 1)] =
        1 - alpha_bar[static_cast<size_t>(k)] / alpha_bar[static_cast<size_t>(k - 1)];
  }
  return s;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["linear_speed"] = r.linear_speed;
  d["linear_accel"] = r.linear_accel;
  d["angular_speed"] = r.angular_speed;
  d["angular_accel"] = r.angular_accel;
  d["dist_to_object"] = r.dist_to_object;
  d["collision_rate"] = r.collision_rate;
  d["dist_to_roadedge"] = r.dist_to_roadedge;
  d["offroad_rate"] = r.offroad_rate;
  d["kinematic"] = r.kinematic;
  d["interactive"] = r.interactive;
  d["map_based"] = r.map_based;
  d["aggregate"] = r.aggregate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint multi-agent trajectory diffusion: pipeline and primitives.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // --- configuration ---------------------------------------------------------
  m.def(
      "default_config", [] { return config_to_json(RunConfig{}, 2); },
      "Default run configuration as pretty JSON.");
  m.def(
      "config_fingerprint", [](const std::string& text) { return config_hash(config_of(text)); },
      py::arg("config_json"), "Canonical hash of a configuration.");

  // --- pipeline ---------------------------------------------------------------
  m.def(
      "generate_scenarios",
      [](const std::string& config_json, const std::string& out_path) {
        const RunConfig cfg = config_of(config_json);
        GenSpec spec = cfg.gen;
        spec.seed = cfg.seed;
        const auto scenes = gen_data(spec);
        write_scenario_file(out_path, scenes);
        return static_cast<int64_t>(scenes.size());
      },
      py::arg("config_json"), py::arg("out_path"),
      "Write a synthetic scenario JSONL file; returns the scene count.");

  m.def(
      "train",
      [](const std::string& config_json, const std::string& scenarios_path,
         const std::string& checkpoint_out, const std::string& loss_csv) {
        const RunConfig cfg = config_of(config_json);
        const auto scenes = read_scenario_file(scenarios_path);
        TrainResult r;
        {
          py::gil_scoped_release off;
          r = train_model(scenes, cfg);
          save_checkpoint(checkpoint_out, r.checkpoint);
          if (!loss_csv.empty()) write_loss_history_csv(loss_csv, r.history);
        }
        py::list history;
        for (const TrainStepLog& h : r.history) {
          py::dict row;
          row["step"] = h.step;
          row["mse"] = h.mse;
          row["smooth"] = h.smooth;
          row["hybrid"] = h.hybrid;
          row["lr"] = h.lr;
          history.append(std::move(row));
        }
        return history;
      },
      py::arg("config_json"), py::arg("scenarios_path"), py::arg("checkpoint_out"),
      py::arg("loss_csv") = std::string(),
      "Fit the model: writes a checkpoint (and optional loss CSV), returns the loss history.");

  m.def(
      "sample",
      [](const std::string& config_json, const std::string& scenarios_path,
         const std::string& checkpoint_path, const std::string& out_path) {
        const RunConfig cfg = config_of(config_json);
        py::gil_scoped_release off;
        const auto scenes = read_scenario_file(scenarios_path);
        const Checkpoint ck = load_checkpoint(checkpoint_path);
        const TrainMeta meta = train_meta_from_json(ck.meta_json);
        Model model = Model::from_checkpoint(ck);
        const NoiseSchedule sched = schedule_of(meta.schedule);
        SampleSpec spec;
        spec.M = cfg.sampler.M;
        spec.guidance_enabled = cfg.sampler.guidance_enabled;
        spec.guide_states = cfg.sampler.guide_states;
        spec.stride = cfg.sampler.stride;
        spec.dt = cfg.gen.dt;
        std::vector<SceneRollouts> all;
        int64_t total = 0;
        for (size_t i = 0; i < scenes.size(); ++i) {
          spec.seed = split_seed(cfg.seed, static_cast<uint64_t>(i));
          SceneRollouts rs = sample_scene(scenes[i], model, sched, meta.stats, spec);
          rs.config_hash = config_hash(cfg);
          rs.checkpoint_hash = hash_hex(checkpoint_file_hash(checkpoint_path));
          total += static_cast<int64_t>(rs.rollouts.size());
          all.push_back(std::move(rs));
        }
        write_rollout_file(out_path, all);
        return total;
      },
      py::arg("config_json"), py::arg("scenarios_path"), py::arg("checkpoint_path"),
      py::arg("out_path"), "Sample rollouts for every scene; returns the rollout count.");

  m.def(
      "evaluate_files",
      [](const std::string& config_json, const std::string& scenarios_path,
         const std::string& rollouts_path) {
        const RunConfig cfg = config_of(config_json);
        const auto scenes = read_scenario_file(scenarios_path);
        const auto rollouts = read_rollout_file(rollouts_path);
        return report_dict(evaluate(scenes, rollouts, cfg.metrics));
      },
      py::arg("config_json"), py::arg("scenarios_path"), py::arg("rollouts_path"),
      "Realism metric report over generated rollouts, as a dict.");

  m.def(
      "score_rollouts",
      [](const std::string& scenarios_path, const std::string& rollouts_path,
         bool count_episodes) {
        const auto scenes = read_scenario_file(scenarios_path);
        const auto all = read_rollout_file(rollouts_path);
        py::dict by_scene;
        for (const SceneRollouts& sr : all) {
          const SceneData* scene = nullptr;
          for (const SceneData& s : scenes) {
            if (s.scene_id == sr.scene_id) scene = &s;
          }
          if (!scene) {
            throw ValidationError("rollouts reference scene '" + sr.scene_id +
                                  "' absent from the scenario file");
          }
          std::vector<std::array<real, 2>> sizes;
          for (const AgentTrack& a : scene->agents) sizes.push_back({a.length, a.width});
          const std::vector<uint8_t> valid(scene->agents.size(), 1);
          py::list scores;
          for (const Rollout& r : sr.rollouts) {
            std::vector<PoseTrack> tracks(scene->agents.size());
            for (size_t a = 0; a < tracks.size(); ++a) {
              for (const PoseState& p : r.agent_poses[a]) {
                tracks[a].x.push_back(p.x);
                tracks[a].y.push_back(p.y);
                tracks[a].heading.push_back(p.heading);
              }
            }
            std::vector<TrajectoryScore> ts(tracks.size());
            for (size_t a = 0; a < tracks.size(); ++a) {
              ts[a].r1 = count_collisions(a, tracks, sizes, valid, count_episodes);
              ts[a].r2 = count_offroad(tracks[a], scene->map, count_episodes);
            }
            scores.append(score_scene(ts, valid));
          }
          by_scene[py::str(sr.scene_id)] = std::move(scores);
        }
        return by_scene;
      },
      py::arg("scenarios_path"), py::arg("rollouts_path"), py::arg("count_episodes") = false,
      "Scene plausibility score per rollout, keyed by scene id (lower is better).");

  // --- primitives --------------------------------------------------------------
  m.def(
      "alpha_bar",
      [](const std::string& kind, int64_t K, real beta_min, real beta_max) {
        return schedule_of(ScheduleConfig{kind, K, beta_min, beta_max}).alpha_bar;
      },
      py::arg("kind"), py::arg("K"), py::arg("beta_min") = 1e-4, py::arg("beta_max") = 0.02,
      "Cumulative signal fractions of a noise schedule (K+1 entries, index 0 = 1).");

  m.def("augment", &augment, py::arg("x"), py::arg("N"), py::arg("T"), py::arg("H"),
        "Adjacent-state concatenation: N x T x H -> N x (T-1) x 2H.");
  m.def("augment_noise", &augment_noise, py::arg("eps"), py::arg("N"), py::arg("T"), py::arg("H"),
        "The same map applied to an i.i.d. noise draw (shared-overlap noise).");
  m.def("de_augment", &de_augment, py::arg("S"), py::arg("N"), py::arg("Tm"), py::arg("H2"),
        "Inverse of augment: averages the two copies of each interior state.");
  m.def("init_noise", &init_noise, py::arg("N"), py::arg("T"), py::arg("H"), py::arg("seed"),
        "Overlap-structured standard-normal starting noise.");
  m.def("guide", &guide, py::arg("values"), py::arg("N"), py::arg("Tm"), py::arg("H2"),
        "Average the overlapping halves at every interior boundary (idempotent).");
  m.def(
      "ddim_step",
      [](const std::vector<real>& S_k, int64_t k, const std::vector<real>& eps,
         const std::vector<real>& alpha_bar) {
        return ddim_step(S_k, k, eps, schedule_from_alpha_bar(alpha_bar));
      },
      py::arg("S_k"), py::arg("k"), py::arg("eps_pred"), py::arg("alpha_bar"),
      "Deterministic reverse transition k -> k-1 under the given signal curve.");

  m.def(
      "penetration_depth",
      [](real ax, real ay, real ah, real al, real aw, real bx, real by, real bh, real bl,
         real bw) {
        return penetration_depth(OrientedBox{ax, ay, ah, al, aw}, OrientedBox{bx, by, bh, bl, bw});
      },
      py::arg("ax"), py::arg("ay"), py::arg("a_heading"), py::arg("a_length"), py::arg("a_width"),
      py::arg("bx"), py::arg("by"), py::arg("b_heading"), py::arg("b_length"), py::arg("b_width"),
      "Oriented-box overlap depth; positive means collision.");

  m.def(
      "point_to_polyline",
      [](real px, real py_, const std::vector<std::array<real, 2>>& points, real width) {
        Polyline line;
        line.points = points;
        line.width = width;
        return point_to_polyline(px, py_, line);
      },
      py::arg("px"), py::arg("py"), py::arg("points"), py::arg("width") = 4.0,
      "Shortest distance from a point to a segment chain.");

  m.def(
      "likelihood_score",
      [](const std::vector<real>& generated, const std::vector<real>& reference, real lo, real hi,
         int64_t bins) {
        return likelihood_score(generated, reference, HistogramSpec{lo, hi, bins});
      },
      py::arg("generated"), py::arg("reference"), py::arg("lo"), py::arg("hi"), py::arg("bins"),
      "Histogram likelihood of reference samples under the generated distribution.");
}
