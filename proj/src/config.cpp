#include "scenediff/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace scenediff {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ValidationError(std::string("config: unknown key '") + item.key() + "' in " +
                            section);
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: bad value for '") + key + "'");
  }
}

json denoiser_section(const DenoiserConfig& d) {
  return json{{"D", d.D},          {"blocks", d.blocks}, {"heads", d.heads},
              {"K", d.K},          {"T", d.T},           {"T_hist", d.T_hist},
              {"H", d.H},          {"N_max", d.N_max},   {"A", d.A},
              {"agent_attention", d.agent_attention},    {"augmented", d.augmented}};
}

void denoiser_from_section(const json& d, DenoiserConfig& out) {
  check_keys(d, "denoiser",
             {"D", "blocks", "heads", "K", "T", "T_hist", "H", "N_max", "A", "agent_attention",
              "augmented"});
  get(d, "D", out.D);
  get(d, "blocks", out.blocks);
  get(d, "heads", out.heads);
  get(d, "K", out.K);
  get(d, "T", out.T);
  get(d, "T_hist", out.T_hist);
  get(d, "H", out.H);
  get(d, "N_max", out.N_max);
  get(d, "A", out.A);
  get(d, "agent_attention", out.agent_attention);
  get(d, "augmented", out.augmented);
}

json gen_to_json(const GenSpec& g) {
  return json{{"n_scenes", g.n_scenes}, {"agents_min", g.agents_min},
              {"agents_max", g.agents_max}, {"map_kinds", g.map_kinds},
              {"dt", g.dt},             {"T_hist", g.T_hist},
              {"T_fut", g.T_fut}};
}

void gen_from_json(const json& j, GenSpec& g) {
  check_keys(j, "gen",
             {"n_scenes", "agents_min", "agents_max", "map_kinds", "dt", "T_hist", "T_fut"});
  get(j, "n_scenes", g.n_scenes);
  get(j, "agents_min", g.agents_min);
  get(j, "agents_max", g.agents_max);
  get(j, "map_kinds", g.map_kinds);
  get(j, "dt", g.dt);
  get(j, "T_hist", g.T_hist);
  get(j, "T_fut", g.T_fut);
}

}  // namespace

std::string config_to_json(const RunConfig& cfg, int indent) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["gen"] = gen_to_json(cfg.gen);
  j["schedule"] = json{{"kind", cfg.schedule.kind},
                       {"K", cfg.schedule.K},
                       {"beta_min", cfg.schedule.beta_min},
                       {"beta_max", cfg.schedule.beta_max}};
  j["denoiser"] = denoiser_section(cfg.denoiser);
  j["train"] = json{{"lambda", cfg.train.lambda},
                    {"lr", cfg.train.lr},
                    {"lr_decay_factor", cfg.train.lr_decay_factor},
                    {"lr_decay_frac", cfg.train.lr_decay_frac},
                    {"batch_size", cfg.train.batch_size},
                    {"steps", cfg.train.steps},
                    {"l1", cfg.train.l1},
                    {"noise_consistent", cfg.train.noise_consistent}};
  j["sampler"] = json{{"M", cfg.sampler.M},
                      {"guidance_enabled", cfg.sampler.guidance_enabled},
                      {"guide_states", cfg.sampler.guide_states},
                      {"stride", cfg.sampler.stride}};
  j["scoring"] = json{{"count_episodes", cfg.scoring.count_episodes}};
  j["metrics"] = json{{"bins", cfg.metrics.bins}};
  return indent > 0 ? j.dump(indent) : j.dump();
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config root",
             {"schema_version", "seed", "gen", "schedule", "denoiser", "train", "sampler",
              "scoring", "metrics"});
  RunConfig cfg;
  get(j, "schema_version", cfg.schema_version);
  if (cfg.schema_version != 1) {
    throw ValidationError("config: unsupported schema_version " +
                          std::to_string(cfg.schema_version));
  }
  get(j, "seed", cfg.seed);
  if (j.contains("gen")) gen_from_json(j.at("gen"), cfg.gen);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, "schedule", {"kind", "K", "beta_min", "beta_max"});
    get(s, "kind", cfg.schedule.kind);
    get(s, "K", cfg.schedule.K);
    get(s, "beta_min", cfg.schedule.beta_min);
    get(s, "beta_max", cfg.schedule.beta_max);
  }
  if (j.contains("denoiser")) denoiser_from_section(j.at("denoiser"), cfg.denoiser);
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"lambda", "lr", "lr_decay_factor", "lr_decay_frac", "batch_size", "steps", "l1",
                "noise_consistent"});
    get(t, "lambda", cfg.train.lambda);
    get(t, "lr", cfg.train.lr);
    get(t, "lr_decay_factor", cfg.train.lr_decay_factor);
    get(t, "lr_decay_frac", cfg.train.lr_decay_frac);
    get(t, "batch_size", cfg.train.batch_size);
    get(t, "steps", cfg.train.steps);
    get(t, "l1", cfg.train.l1);
    get(t, "noise_consistent", cfg.train.noise_consistent);
  }
  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    check_keys(s, "sampler", {"M", "guidance_enabled", "guide_states", "stride"});
    get(s, "M", cfg.sampler.M);
    get(s, "guidance_enabled", cfg.sampler.guidance_enabled);
    get(s, "guide_states", cfg.sampler.guide_states);
    get(s, "stride", cfg.sampler.stride);
  }
  if (j.contains("scoring")) {
    const json& s = j.at("scoring");
    check_keys(s, "scoring", {"count_episodes"});
    get(s, "count_episodes", cfg.scoring.count_episodes);
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    check_keys(m, "metrics", {"bins"});
    get(m, "bins", cfg.metrics.bins);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write config file '" + path + "'");
  out << config_to_json(cfg) << '\n';
}

void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (cfg.schema_version != 1) fail("unsupported schema version");
  if (cfg.schedule.kind != "linear" && cfg.schedule.kind != "cosine") {
    fail("schedule.kind must be linear or cosine");
  }
  if (cfg.schedule.K < 2) fail("schedule.K must be at least 2");
  if (!(cfg.schedule.beta_min > 0) || !(cfg.schedule.beta_min < cfg.schedule.beta_max) ||
      !(cfg.schedule.beta_max < 1)) {
    fail("schedule betas must satisfy 0 < beta_min < beta_max < 1");
  }
  const DenoiserConfig& d = cfg.denoiser;
  if (d.D < 1 || d.blocks < 1 || d.heads < 1 || d.T < 2 || d.H < 1 || d.N_max < 1 || d.A < 0) {
    fail("denoiser dimensions must be positive (T at least 2)");
  }
  if (d.D % d.heads != 0) fail("denoiser.D must be divisible by heads");
  if (d.K != cfg.schedule.K) fail("denoiser.K must match schedule.K");
  if (d.T != cfg.gen.T_fut) fail("denoiser.T must match gen.T_fut");
  if (d.T_hist != cfg.gen.T_hist) fail("denoiser.T_hist must match gen.T_hist");
  if (d.T_hist < 1) fail("denoiser.T_hist must be positive");
  if (d.H != 3) fail("denoiser.H must be 3 (vx, vy, yaw rate)");
  if (cfg.gen.agents_max > d.N_max) fail("gen.agents_max exceeds denoiser.N_max");
  const TrainConfig& t = cfg.train;
  if (!(t.lambda >= 0)) fail("train.lambda must be non-negative");
  if (!(t.lr > 0)) fail("train.lr must be positive");
  if (!(t.lr_decay_factor > 0) || t.lr_decay_factor > 1) {
    fail("train.lr_decay_factor must be in (0, 1]");
  }
  if (!(t.lr_decay_frac > 0) || t.lr_decay_frac > 1) {
    fail("train.lr_decay_frac must be in (0, 1]");
  }
  if (t.batch_size < 1 || t.steps < 1) fail("train.batch_size and steps must be positive");
  if (cfg.sampler.M < 1) fail("sampler.M must be at least 1");
  if (cfg.sampler.stride < 1) fail("sampler.stride must be at least 1");
  if (cfg.metrics.bins < 1) fail("metrics.bins must be at least 1");
  if (cfg.gen.n_scenes < 1 || cfg.gen.agents_min < 1 ||
      cfg.gen.agents_max < cfg.gen.agents_min || !(cfg.gen.dt > 0) || cfg.gen.T_hist < 1 ||
      cfg.gen.T_fut < 2) {
    fail("gen section is out of range");
  }
}

std::string config_hash(const RunConfig& cfg) {
  const std::string canon = config_to_json(cfg, 0);
  return hash_hex(fnv1a64(canon.data(), canon.size()));
}

std::string denoiser_to_json(const DenoiserConfig& cfg) { return denoiser_section(cfg).dump(); }

DenoiserConfig denoiser_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("denoiser config is not valid JSON: ") + e.what());
  }
  DenoiserConfig out;
  denoiser_from_section(j, out);
  return out;
}

}  // namespace scenediff
