// Command-line front end: gen-data, train, sample, score, eval, ablate.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scenediff/checkpoint.hpp"
#include "scenediff/config.hpp"
#include "scenediff/metrics.hpp"
#include "scenediff/model.hpp"
#include "scenediff/sampler.hpp"
#include "scenediff/scenario.hpp"
#include "scenediff/schedule.hpp"
#include "scenediff/scoring.hpp"
#include "scenediff/train.hpp"

namespace {

using namespace scenediff;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

int fail(int code, const char* kind, const std::string& message) {
  std::string m = message;
  for (char& c : m) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  std::fprintf(stderr, "scenediff: error kind=%s msg=\"%s\"\n", kind, m.c_str());
  return code;
}

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

RunConfig resolved_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  validate(cfg);
  return cfg;
}

NoiseSchedule schedule_of(const ScheduleConfig& sc) {
  return make_schedule(schedule_kind_from_string(sc.kind), sc.K, sc.beta_min, sc.beta_max);
}

SampleSpec sampler_spec(const RunConfig& cfg) {
  SampleSpec spec;
  spec.M = cfg.sampler.M;
  spec.guidance_enabled = cfg.sampler.guidance_enabled;
  spec.guide_states = cfg.sampler.guide_states;
  spec.stride = cfg.sampler.stride;
  spec.dt = cfg.gen.dt;
  return spec;
}

// Samples every scene with per-scene seeds split from the master seed.
std::vector<SceneRollouts> sample_all(const std::vector<SceneData>& scenes, Model& model,
                                      const NoiseSchedule& sched, const StateStats& stats,
                                      const RunConfig& cfg, const std::string& cfg_hash,
                                      const std::string& ckpt_hash) {
  std::vector<SceneRollouts> all;
  all.reserve(scenes.size());
  SampleSpec spec = sampler_spec(cfg);
  for (size_t i = 0; i < scenes.size(); ++i) {
    spec.seed = split_seed(cfg.seed, static_cast<uint64_t>(i));
    SceneRollouts rs = sample_scene(scenes[i], model, sched, stats, spec);
    rs.config_hash = cfg_hash;
    rs.checkpoint_hash = ckpt_hash;
    all.push_back(std::move(rs));
  }
  return all;
}

struct ScoredScene {
  std::vector<real> scene_scores;                      // one per rollout
  std::vector<std::vector<TrajectoryScore>> per_agent;  // rollout -> agent
};

ScoredScene score_scene_rollouts(const SceneData& scene, const SceneRollouts& sr,
                                 bool count_episodes) {
  const size_t n = scene.agents.size();
  std::vector<std::array<real, 2>> sizes;
  sizes.reserve(n);
  for (const AgentTrack& a : scene.agents) sizes.push_back({a.length, a.width});
  const std::vector<uint8_t> valid(n, 1);
  ScoredScene out;
  for (const Rollout& r : sr.rollouts) {
    if (r.agent_poses.size() != n) {
      throw ValidationError("scene '" + scene.scene_id +
                            "': rollout agent count does not match the scenario");
    }
    std::vector<PoseTrack> tracks(n);
    for (size_t a = 0; a < n; ++a) {
      for (const PoseState& p : r.agent_poses[a]) {
        tracks[a].x.push_back(p.x);
        tracks[a].y.push_back(p.y);
        tracks[a].heading.push_back(p.heading);
      }
    }
    std::vector<TrajectoryScore> scores(n);
    for (size_t a = 0; a < n; ++a) {
      scores[a].r1 = count_collisions(a, tracks, sizes, valid, count_episodes);
      scores[a].r2 = count_offroad(tracks[a], scene.map, count_episodes);
    }
    out.scene_scores.push_back(score_scene(scores, valid));
    out.per_agent.push_back(std::move(scores));
  }
  return out;
}

std::map<std::string, const SceneData*> index_scenes(const std::vector<SceneData>& scenes) {
  std::map<std::string, const SceneData*> byid;
  for (const SceneData& s : scenes) byid[s.scene_id] = &s;
  return byid;
}

const SceneData& scene_for(const std::map<std::string, const SceneData*>& byid,
                           const std::string& id) {
  const auto it = byid.find(id);
  if (it == byid.end()) {
    throw ValidationError("rollouts reference scene '" + id + "' absent from the scenario file");
  }
  return *it->second;
}

json pose_json(const PoseState& p) {
  return json{{"t", p.t}, {"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"speed", p.speed}};
}

// --- subcommands -------------------------------------------------------------

int cmd_gen_data(const CommonArgs& args) {
  const RunConfig cfg = resolved_config(args);
  GenSpec spec = cfg.gen;
  spec.seed = cfg.seed;
  const std::vector<SceneData> scenes = gen_data(spec);
  write_scenario_file(args.out, scenes);
  std::printf("gen-data: wrote %zu scenes -> %s\n", scenes.size(), args.out.c_str());
  return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& scenario_path,
              const std::string& loss_csv, int64_t checkpoint_every) {
  const RunConfig cfg = resolved_config(args);
  const std::vector<SceneData> scenes = read_scenario_file(scenario_path);
  const CheckpointHook hook = [&](int64_t step, const Checkpoint& ck) {
    save_checkpoint(args.out + "." + std::to_string(step), ck);
  };
  const TrainResult result =
      train_model(scenes, cfg, checkpoint_every, checkpoint_every > 0 ? hook : CheckpointHook{});
  save_checkpoint(args.out, result.checkpoint);
  const std::string csv = loss_csv.empty() ? args.out + ".loss.csv" : loss_csv;
  write_loss_history_csv(csv, result.history);
  std::printf("train: %zu steps, final L_mse %.6f L_hybrid %.6f -> %s (history %s)\n",
              result.history.size(), result.history.back().mse, result.history.back().hybrid,
              args.out.c_str(), csv.c_str());
  return kExitOk;
}

int cmd_sample(const CommonArgs& args, const std::string& scenario_path,
               const std::string& checkpoint_path, const std::string& csv_path) {
  const RunConfig cfg = resolved_config(args);
  const std::vector<SceneData> scenes = read_scenario_file(scenario_path);
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const TrainMeta meta = train_meta_from_json(ck.meta_json);
  Model model = Model::from_checkpoint(ck);
  const NoiseSchedule sched = schedule_of(meta.schedule);
  const std::vector<SceneRollouts> all =
      sample_all(scenes, model, sched, meta.stats, cfg, config_hash(cfg),
                 hash_hex(checkpoint_file_hash(checkpoint_path)));
  write_rollout_file(args.out, all);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw ValidationError("cannot write trajectory CSV '" + csv_path + "'");
    csv << "scene_id,rollout_id,agent,t,x,y,heading,speed\n";
    char line[256];
    for (const SceneRollouts& sr : all) {
      for (const Rollout& r : sr.rollouts) {
        for (size_t a = 0; a < r.agent_poses.size(); ++a) {
          for (const PoseState& p : r.agent_poses[a]) {
            std::snprintf(line, sizeof line, "%s,%lld,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          sr.scene_id.c_str(), static_cast<long long>(r.rollout_id), a, p.t, p.x,
                          p.y, p.heading, p.speed);
            csv << line;
          }
        }
      }
    }
  }
  size_t total = 0;
  for (const SceneRollouts& sr : all) total += sr.rollouts.size();
  std::printf("sample: %zu rollouts over %zu scenes -> %s\n", total, scenes.size(),
              args.out.c_str());
  return kExitOk;
}

int cmd_score(const CommonArgs& args, const std::string& scenario_path,
              const std::string& rollout_path, int64_t keep, int64_t oversample) {
  const RunConfig cfg = resolved_config(args);
  const std::vector<SceneData> scenes = read_scenario_file(scenario_path);
  const std::vector<SceneRollouts> all = read_rollout_file(rollout_path);
  const auto byid = index_scenes(scenes);

  std::ofstream out(args.out, std::ios::trunc);
  if (!out) throw ValidationError("cannot write scored rollouts '" + args.out + "'");
  size_t written = 0;
  for (const SceneRollouts& sr : all) {
    const SceneData& scene = scene_for(byid, sr.scene_id);
    if (oversample > 0 &&
        static_cast<int64_t>(sr.rollouts.size()) != keep * oversample) {
      throw ValidationError("scene '" + sr.scene_id + "': expected " +
                            std::to_string(keep * oversample) + " rollouts (keep x oversample), found " +
                            std::to_string(sr.rollouts.size()));
    }
    const ScoredScene scored = score_scene_rollouts(scene, sr, cfg.scoring.count_episodes);
    std::vector<size_t> kept(sr.rollouts.size());
    for (size_t i = 0; i < kept.size(); ++i) kept[i] = i;
    if (keep > 0) {
      if (static_cast<size_t>(keep) > sr.rollouts.size()) {
        throw ValidationError("scene '" + sr.scene_id + "': cannot keep " + std::to_string(keep) +
                              " of " + std::to_string(sr.rollouts.size()) + " rollouts");
      }
      kept = filter_rollouts(scored.scene_scores, static_cast<size_t>(keep));
    }
    for (size_t idx : kept) {
      const Rollout& r = sr.rollouts[idx];
      json j;
      j["scene_id"] = sr.scene_id;
      j["rollout_id"] = r.rollout_id;
      j["config_hash"] = sr.config_hash;
      j["checkpoint_hash"] = sr.checkpoint_hash;
      j["agents"] = json::array();
      for (const auto& poses : r.agent_poses) {
        json ja;
        ja["poses"] = json::array();
        for (const PoseState& p : poses) ja["poses"].push_back(pose_json(p));
        j["agents"].push_back(std::move(ja));
      }
      json agents_scores = json::array();
      for (const TrajectoryScore& ts : scored.per_agent[idx]) {
        agents_scores.push_back({{"r1", ts.r1}, {"r2", ts.r2}, {"f", ts.f()}});
      }
      j["score"] = {{"scene", scored.scene_scores[idx]}, {"agents", std::move(agents_scores)}};
      out << j.dump() << "\n";
      ++written;
    }
  }
  if (!out.good()) throw ValidationError("failed while writing '" + args.out + "'");
  std::printf("score: wrote %zu scored rollouts -> %s\n", written, args.out.c_str());
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& scenario_path,
             const std::string& rollout_path, const std::string& checkpoint_path,
             const std::string& csv_path, const std::string& label, bool force) {
  const RunConfig cfg = resolved_config(args);
  const std::vector<SceneData> scenes = read_scenario_file(scenario_path);
  const std::vector<SceneRollouts> all = read_rollout_file(rollout_path);
  const std::string want_cfg = config_hash(cfg);
  const std::string want_ckpt =
      checkpoint_path.empty() ? std::string() : hash_hex(checkpoint_file_hash(checkpoint_path));
  if (!force) {
    for (const SceneRollouts& sr : all) {
      if (sr.config_hash != want_cfg) {
        throw ValidationError("scene '" + sr.scene_id + "': rollout config hash " +
                              sr.config_hash + " does not match this config " + want_cfg +
                              " (pass --force to evaluate anyway)");
      }
      if (!want_ckpt.empty() && sr.checkpoint_hash != want_ckpt) {
        throw ValidationError("scene '" + sr.scene_id + "': rollout checkpoint hash " +
                              sr.checkpoint_hash + " does not match " + want_ckpt +
                              " (pass --force to evaluate anyway)");
      }
    }
  }
  const MetricReport report = evaluate(scenes, all, cfg.metrics);
  std::ofstream out(args.out, std::ios::trunc);
  if (!out) throw ValidationError("cannot write metric report '" + args.out + "'");
  out << report_to_json(report) << "\n";
  if (!out.good()) throw ValidationError("failed while writing '" + args.out + "'");
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw ValidationError("cannot write metric CSV '" + csv_path + "'");
    csv << report_csv_header() << "\n" << report_to_csv_row(report, label) << "\n";
  }
  std::printf("eval: realism %.6f (kinematic %.6f interactive %.6f map %.6f) -> %s\n",
              report.aggregate, report.kinematic, report.interactive, report.map_based,
              args.out.c_str());
  return kExitOk;
}

MetricReport run_variant(const std::vector<SceneData>& scenes, const RunConfig& cfg,
                         int64_t filter_keep, const TrainResult* pretrained) {
  const TrainResult local = pretrained ? TrainResult{} : train_model(scenes, cfg);
  const TrainResult& tr = pretrained ? *pretrained : local;
  Model model = Model::from_checkpoint(tr.checkpoint);
  const NoiseSchedule sched = schedule_of(cfg.schedule);
  std::vector<SceneRollouts> all =
      sample_all(scenes, model, sched, tr.stats, cfg, config_hash(cfg), "ablate");
  if (filter_keep > 0) {
    for (SceneRollouts& sr : all) {
      const SceneData* scene = nullptr;
      for (const SceneData& s : scenes) {
        if (s.scene_id == sr.scene_id) scene = &s;
      }
      if (!scene) throw ValidationError("ablate: sampled scene lost its scenario");
      const ScoredScene scored = score_scene_rollouts(*scene, sr, cfg.scoring.count_episodes);
      std::vector<Rollout> kept;
      for (size_t idx : filter_rollouts(scored.scene_scores, static_cast<size_t>(filter_keep))) {
        kept.push_back(sr.rollouts[idx]);
      }
      sr.rollouts = std::move(kept);
    }
  }
  return evaluate(scenes, all, cfg.metrics);
}

int cmd_ablate(const CommonArgs& args, const std::string& scenario_path) {
  const RunConfig base = resolved_config(args);
  const std::vector<SceneData> scenes = [&] {
    if (!scenario_path.empty()) return read_scenario_file(scenario_path);
    GenSpec spec = base.gen;
    spec.seed = base.seed;
    return gen_data(spec);
  }();

  std::ofstream out(args.out, std::ios::trunc);
  if (!out) throw ValidationError("cannot write ablation table '" + args.out + "'");
  out << report_csv_header() << "\n";

  const auto emit = [&](const std::string& label, const MetricReport& r) {
    out << report_to_csv_row(r, label) << "\n";
    std::printf("ablate: %-20s realism %.6f\n", label.c_str(), r.aggregate);
  };

  RunConfig v = base;
  v.denoiser.agent_attention = false;
  validate(v);
  emit("no_agent_attention", run_variant(scenes, v, 0, nullptr));

  v = base;
  v.denoiser.augmented = false;
  validate(v);
  emit("no_augmentation", run_variant(scenes, v, 0, nullptr));

  v = base;
  v.train.noise_consistent = false;
  validate(v);
  emit("no_noise_consistency", run_variant(scenes, v, 0, nullptr));

  v = base;
  v.train.lambda = 0;
  validate(v);
  emit("no_smooth_loss", run_variant(scenes, v, 0, nullptr));

  // Guidance and filtering act downstream of training: reuse one base model.
  const TrainResult base_trained = train_model(scenes, base);
  v = base;
  v.sampler.guidance_enabled = false;
  validate(v);
  emit("no_guidance", run_variant(scenes, v, 0, &base_trained));

  v = base;
  emit("with_filter", run_variant(scenes, v, std::max<int64_t>(1, base.sampler.M / 2),
                                  &base_trained));

  if (!out.good()) throw ValidationError("failed while writing '" + args.out + "'");
  std::printf("ablate: 6 variants -> %s\n", args.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint multi-agent trajectory diffusion: data, training, sampling, evaluation"};
  app.require_subcommand(1);

  std::map<std::string, CommonArgs> common;
  const auto add_common = [&](CLI::App* sub, bool out_required = true) {
    CommonArgs& args = common[sub->get_name()];
    sub->add_option("--config", args.config_path, "run configuration JSON");
    sub->add_option("--seed", args.seed, "seed override")->each([&](const std::string&) {
      args.seed_set = true;
    });
    auto* out = sub->add_option("--out", args.out, "output path");
    if (out_required) out->required();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic scenario file");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "fit the model; write checkpoint + loss CSV");
  add_common(train);
  std::string train_scenarios, train_loss_csv;
  int64_t train_ckpt_every = 0;
  train->add_option("--scenarios", train_scenarios, "scenario JSONL input")->required();
  train->add_option("--loss-csv", train_loss_csv, "loss history path (default <out>.loss.csv)");
  train->add_option("--checkpoint-every", train_ckpt_every, "periodic checkpoint interval");

  CLI::App* sample = app.add_subcommand("sample", "sample rollouts from a checkpoint");
  add_common(sample);
  std::string sample_scenarios, sample_ckpt, sample_csv;
  sample->add_option("--scenarios", sample_scenarios, "scenario JSONL input")->required();
  sample->add_option("--checkpoint", sample_ckpt, "trained checkpoint")->required();
  sample->add_option("--csv", sample_csv, "also write a plot-ready trajectory CSV");

  CLI::App* score = app.add_subcommand("score", "annotate rollouts with plausibility scores");
  add_common(score);
  std::string score_scenarios, score_rollouts;
  int64_t score_keep = 0, score_oversample = 0;
  score->add_option("--scenarios", score_scenarios, "scenario JSONL input")->required();
  score->add_option("--rollouts", score_rollouts, "rollout JSONL input")->required();
  auto* keep_opt = score->add_option("--keep", score_keep, "retain the best K rollouts per scene");
  score->add_option("--oversample", score_oversample, "declared oversampling factor")
      ->needs(keep_opt);

  CLI::App* eval = app.add_subcommand("eval", "compute the realism metric report");
  add_common(eval);
  std::string eval_scenarios, eval_rollouts, eval_ckpt, eval_csv, eval_label = "eval";
  bool eval_force = false;
  eval->add_option("--scenarios", eval_scenarios, "scenario JSONL input")->required();
  eval->add_option("--rollouts", eval_rollouts, "rollout JSONL input")->required();
  eval->add_option("--checkpoint", eval_ckpt, "verify rollouts against this checkpoint");
  eval->add_option("--csv", eval_csv, "also write a one-row metric CSV");
  eval->add_option("--label", eval_label, "row label for the CSV");
  eval->add_flag("--force", eval_force, "evaluate despite hash mismatches");

  CLI::App* ablate = app.add_subcommand("ablate", "run the six-variant ablation grid");
  add_common(ablate);
  std::string ablate_scenarios;
  ablate->add_option("--scenarios", ablate_scenarios, "reuse an existing scenario file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, "usage", e.what());
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen_data(common["gen-data"]);
    if (app.got_subcommand(train)) {
      return cmd_train(common["train"], train_scenarios, train_loss_csv, train_ckpt_every);
    }
    if (app.got_subcommand(sample)) {
      return cmd_sample(common["sample"], sample_scenarios, sample_ckpt, sample_csv);
    }
    if (app.got_subcommand(score)) {
      if (score_keep < 0 || score_oversample < 0 || (score_oversample > 0 && score_keep == 0)) {
        return fail(kExitUsage, "usage", "oversample requires a positive keep count");
      }
      return cmd_score(common["score"], score_scenarios, score_rollouts, score_keep,
                       score_oversample);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(common["eval"], eval_scenarios, eval_rollouts, eval_ckpt, eval_csv,
                      eval_label, eval_force);
    }
    if (app.got_subcommand(ablate)) return cmd_ablate(common["ablate"], ablate_scenarios);
    return fail(kExitUsage, "usage", "no subcommand selected");
  } catch (const ValidationError& e) {
    return fail(kExitValidation, "validation", e.what());
  } catch (const ShapeError& e) {
    return fail(kExitValidation, "validation", e.what());
  } catch (const NumericError& e) {
    return fail(kExitNumeric, "numeric", e.what());
  } catch (const std::exception& e) {
    return fail(kExitValidation, "validation", e.what());
  }
}
