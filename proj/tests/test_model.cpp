#include "scenediff/model.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"

using namespace scenediff;

namespace {

DenoiserConfig tiny_cfg() {
  DenoiserConfig cfg;
  cfg.D = 16;
  cfg.blocks = 1;
  cfg.heads = 2;
  cfg.K = 20;
  cfg.T = 6;
  cfg.T_hist = 2;
  cfg.H = 3;
  cfg.N_max = 4;
  cfg.A = 2;
  return cfg;
}

SceneData probe_scene(int64_t n_agents) {
  SceneData s;
  s.scene_id = "probe";
  Polyline a, b, c;
  a.width = 4;
  a.points = {{-20, 0}, {0, 0}, {20, 0}};
  b.width = 4;
  b.points = {{-20, 4}, {20, 4}};
  c.width = 3;
  c.points = {{-20, -6}, {20, -6}, {20, 30}};
  s.map = {a, b, c};
  for (int64_t i = 0; i < n_agents; ++i) {
    AgentTrack t;
    t.type = i % 2 ? AgentType::bicycle : AgentType::vehicle;
    t.length = 4.0 + 0.3 * static_cast<real>(i);
    t.width = 1.8;
    const real y = static_cast<real>(i) * 1.5 - 2;
    t.history = {{-0.5, -3.0 + static_cast<real>(i), y, 0.1 * static_cast<real>(i), 4.0},
                 {0.0, -1.0 + static_cast<real>(i), y, 0.1 * static_cast<real>(i), 4.2}};
    s.agents.push_back(t);
  }
  return s;
}

Tensor random_states(const Model& m, int64_t n, uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn({n, m.tokens(), m.channels()}, rng);
}

real max_abs_diff(const std::vector<real>& a, const std::vector<real>& b) {
  real worst = 0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_SUITE("model.stepembed") {
  TEST_CASE("base vector at zero alternates zero and one") {
    const auto e = sinusoidal_embedding(0, 8);
    for (size_t i = 0; i < e.size(); ++i) {
      CHECK(e[i] == (i % 2 ? 1.0 : 0.0));
    }
  }

  TEST_CASE("deterministic and injective over the step range") {
    const int64_t D = 16;
    CHECK(sinusoidal_embedding(7, D) == sinusoidal_embedding(7, D));
    std::set<std::vector<real>> seen;
    for (int64_t k = 1; k <= 100; ++k) {
      CHECK(seen.insert(sinusoidal_embedding(static_cast<real>(k), D)).second);
    }
  }

  TEST_CASE("odd widths end on a sine slot") {
    const auto e = sinusoidal_embedding(0, 5);
    CHECK(e.size() == 5);
    CHECK(e[4] == 0.0);
  }
}

TEST_SUITE("model.features") {
  TEST_CASE("feature widths and one-hot layout") {
    const auto cfg = tiny_cfg();
    const SceneData s = probe_scene(2);
    const auto f = extract_features(s, cfg);
    CHECK(f.n == 2);
    CHECK(f.F == cfg.T_hist * 5 + 5);
    REQUIRE(static_cast<int64_t>(f.agent.size()) == f.n * f.F);
    // agent 0 is a vehicle: one-hot (1,0,0) just before length/width
    const size_t tail0 = static_cast<size_t>(f.F) - 5;
    CHECK(f.agent[tail0 + 0] == 1.0);
    CHECK(f.agent[tail0 + 1] == 0.0);
    CHECK(f.agent[tail0 + 2] == 0.0);
    CHECK(f.agent[tail0 + 3] == 4.0);   // length
    CHECK(f.agent[tail0 + 4] == 1.8);   // width
    // agent 1 is a bicycle (slot order: vehicle, pedestrian, bicycle)
    CHECK(f.agent[static_cast<size_t>(f.F) + tail0 + 2] == 1.0);
  }

  TEST_CASE("map points are agent-relative and nearest-first") {
    const auto cfg = tiny_cfg();  // A = 2
    const SceneData s = probe_scene(1);  // agent anchor (-1, -2); lines at y=0,4,-6
    const auto f = extract_features(s, cfg);
    REQUIRE(f.poly_valid.size() == 2);
    CHECK(f.poly_valid[0] == 1);
    CHECK(f.poly_valid[1] == 1);
    // Nearest is the y=0 line (distance 2): first point (-20,0) relative to
    // anchor (-1,-2) is (-19, 2); width feature rides along.
    CHECK(f.map_pts[0] == doctest::Approx(-19.0));
    CHECK(f.map_pts[1] == doctest::Approx(2.0));
    CHECK(f.map_pts[2] == doctest::Approx(4.0));
    // Last resampled point of that polyline is its endpoint (20, 0).
    const size_t last = static_cast<size_t>((kMapPoints - 1) * 3);
    CHECK(f.map_pts[last + 0] == doctest::Approx(21.0));
    CHECK(f.map_pts[last + 1] == doctest::Approx(2.0));
  }

  TEST_CASE("scene constraints are enforced") {
    const auto cfg = tiny_cfg();
    CHECK_THROWS_AS((void)extract_features(SceneData{}, cfg), ValidationError);
    CHECK_THROWS_AS((void)extract_features(probe_scene(5), cfg), ValidationError);  // N_max 4
    SceneData s = probe_scene(1);
    s.agents[0].history.resize(1);  // shorter than T_hist
    CHECK_THROWS_AS((void)extract_features(s, cfg), ValidationError);
  }
}

TEST_SUITE("model.encode") {
  TEST_CASE("identical agents get identical embeddings") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 11);
    SceneData s = probe_scene(1);
    s.agents.push_back(s.agents[0]);  // exact copy, same neighborhood
    const Tensor c = m.encode(extract_features(s, cfg));
    REQUIRE(c.shape() == Shape{2, cfg.D});
    for (int64_t d = 0; d < cfg.D; ++d) {
      CHECK(c.data()[d] == c.data()[static_cast<size_t>(cfg.D + d)]);
    }
  }

  TEST_CASE("empty map reduces to the history branch") {
    auto cfg = tiny_cfg();
    Model with_map(cfg, 3);
    auto cfg0 = cfg;
    cfg0.A = 0;
    Model no_map(cfg0, 3);  // same seed, same parameter inventory
    SceneData s = probe_scene(2);
    s.map.clear();
    const Tensor a = with_map.encode(extract_features(s, cfg));
    const Tensor b = no_map.encode(extract_features(s, cfg0));
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
  }

  TEST_CASE("translating the scene and re-centering leaves embeddings unchanged") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 4);
    SceneData base = probe_scene(3);
    recenter_scene(base);
    SceneData moved = probe_scene(3);
    for (Polyline& l : moved.map) {
      for (auto& p : l.points) {
        p[0] += 120;
        p[1] -= 40;
      }
    }
    for (AgentTrack& a : moved.agents) {
      for (auto* seq : {&a.history, &a.future}) {
        for (PoseState& p : *seq) {
          p.x += 120;
          p.y -= 40;
        }
      }
    }
    recenter_scene(moved);
    const Tensor ca = m.encode(extract_features(base, cfg));
    const Tensor cb = m.encode(extract_features(moved, cfg));
    CHECK(max_abs_diff(ca.data(), cb.data()) < 1e-12);
  }

  TEST_CASE("masked agents encode to zero") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 5);
    const auto f = extract_features(probe_scene(3), cfg);
    const Tensor c = m.encode(f, {1, 0, 1});
    for (int64_t d = 0; d < cfg.D; ++d) {
      CHECK(c.data()[static_cast<size_t>(cfg.D + d)] == 0.0);
    }
    CHECK(c.data()[0] != 0.0);
  }
}

TEST_SUITE("model.denoise") {
  TEST_CASE("output shape follows the augmented layout") {
    DenoiserConfig cfg = tiny_cfg();
    cfg.T = 16;
    cfg.N_max = 4;
    Model m(cfg, 7);
    SceneData s = probe_scene(4);
    const Tensor cond = m.encode(extract_features(s, cfg));
    const Tensor out = m.denoise(random_states(m, 4, 1), 3, cond);
    CHECK(out.shape() == Shape{4, 15, 6});
  }

  TEST_CASE("non-augmented layout predicts per-tick noise") {
    DenoiserConfig cfg = tiny_cfg();
    cfg.augmented = false;
    Model m(cfg, 7);
    CHECK(m.tokens() == cfg.T);
    CHECK(m.channels() == cfg.H);
    const Tensor cond = m.encode(extract_features(probe_scene(2), cfg));
    const Tensor out = m.denoise(random_states(m, 2, 1), 1, cond);
    CHECK(out.shape() == Shape{2, cfg.T, cfg.H});
  }

  TEST_CASE("repeat calls are bit-identical") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 9);
    const Tensor cond = m.encode(extract_features(probe_scene(3), cfg));
    const Tensor s = random_states(m, 3, 2);
    const Tensor a = m.denoise(s, 5, cond);
    const Tensor b = m.denoise(s, 5, cond);
    CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
  }

  TEST_CASE("step and shape domains are validated") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 1);
    const Tensor cond = m.encode(extract_features(probe_scene(2), cfg));
    const Tensor s = random_states(m, 2, 3);
    CHECK_THROWS_AS((void)m.denoise(s, 0, cond), ValidationError);
    CHECK_THROWS_AS((void)m.denoise(s, cfg.K + 1, cond), ValidationError);
    CHECK_THROWS_AS((void)m.denoise(s, 1, cond, {1, 0, 1}), ShapeError);
    Rng rng(4);
    const Tensor bad = Tensor::randn({2, m.tokens(), m.channels() + 1}, rng);
    CHECK_THROWS_AS((void)m.denoise(bad, 1, cond), ShapeError);
    const Tensor bad_cond = Tensor::randn({3, cfg.D}, rng);
    CHECK_THROWS_AS((void)m.denoise(s, 1, bad_cond), ShapeError);
  }

  TEST_CASE("agent permutation permutes the output identically") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 13);
    const SceneData s = probe_scene(3);
    const auto f = extract_features(s, cfg);
    const Tensor cond = m.encode(f);
    const Tensor x = random_states(m, 3, 6);
    const Tensor out = m.denoise(x, 4, cond);

    const std::vector<int64_t> perm{2, 0, 1};  // new index -> old index
    SceneData ps;
    ps.scene_id = s.scene_id;
    ps.map = s.map;
    for (int64_t i : perm) ps.agents.push_back(s.agents[static_cast<size_t>(i)]);
    const Tensor pcond = m.encode(extract_features(ps, cfg));

    const int64_t row = m.tokens() * m.channels();
    std::vector<real> px(x.data().size());
    for (size_t i = 0; i < perm.size(); ++i) {
      std::copy(x.data().begin() + perm[i] * row, x.data().begin() + (perm[i] + 1) * row,
                px.begin() + static_cast<int64_t>(i) * row);
    }
    const Tensor pout = m.denoise(Tensor::from_data(x.shape(), px), 4, pcond);

    for (size_t i = 0; i < perm.size(); ++i) {
      for (int64_t e = 0; e < row; ++e) {
        const real orig = out.data()[static_cast<size_t>(perm[i] * row + e)];
        const real perm_v = pout.data()[i * static_cast<size_t>(row) + static_cast<size_t>(e)];
        CHECK(std::abs(orig - perm_v) <= 1e-12);
      }
    }
  }

  TEST_CASE("without agent attention, other agents cannot influence the output") {
    DenoiserConfig cfg = tiny_cfg();
    cfg.agent_attention = false;
    cfg.blocks = 1;
    Model m(cfg, 17);
    const auto f = extract_features(probe_scene(2), cfg);
    const Tensor cond = m.encode(f);
    const Tensor x = random_states(m, 2, 8);
    const Tensor base = m.denoise(x, 2, cond);

    std::vector<real> bumped = x.data();
    const int64_t row = m.tokens() * m.channels();
    for (int64_t e = 0; e < row; ++e) bumped[static_cast<size_t>(row + e)] += 3.5;
    const Tensor other = m.denoise(Tensor::from_data(x.shape(), bumped), 2, cond);

    for (int64_t e = 0; e < row; ++e) {
      CHECK(base.data()[static_cast<size_t>(e)] == other.data()[static_cast<size_t>(e)]);
    }
    // and the perturbed agent itself must react
    CHECK(max_abs_diff(base.data(), other.data()) > 0);
  }

  TEST_CASE("masked agents are invisible and silenced") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 19);
    const auto f = extract_features(probe_scene(3), cfg);
    const std::vector<uint8_t> mask{1, 0, 1};
    const Tensor cond = m.encode(f, mask);
    const Tensor x = random_states(m, 3, 9);
    const Tensor base = m.denoise(x, 6, cond, mask);

    const int64_t row = m.tokens() * m.channels();
    for (int64_t e = 0; e < row; ++e) {
      CHECK(base.data()[static_cast<size_t>(row + e)] == 0.0);
    }
    std::vector<real> bumped = x.data();
    for (int64_t e = 0; e < row; ++e) bumped[static_cast<size_t>(row + e)] -= 7.25;
    const Tensor other = m.denoise(Tensor::from_data(x.shape(), bumped), 6, cond, mask);
    for (int64_t a : {0, 2}) {
      for (int64_t e = 0; e < row; ++e) {
        CHECK(base.data()[static_cast<size_t>(a * row + e)] ==
              other.data()[static_cast<size_t>(a * row + e)]);
      }
    }
  }
}

TEST_SUITE("model.gradcheck") {
  TEST_CASE("finite differences agree with backward on random parameters") {
    DenoiserConfig cfg;
    cfg.D = 8;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.K = 10;
    cfg.T = 4;
    cfg.T_hist = 1;
    cfg.H = 1;
    cfg.N_max = 3;
    cfg.A = 1;
    Model m(cfg, 23);
    SceneData s = probe_scene(2);
    for (AgentTrack& a : s.agents) a.history.erase(a.history.begin());
    const auto f = extract_features(s, cfg);
    Rng rng(31);
    const Tensor x = Tensor::randn({2, m.tokens(), m.channels()}, rng);
    const Tensor target = Tensor::randn({2, m.tokens(), m.channels()}, rng);

    auto loss_value = [&]() {
      const Tensor cond = m.encode(f);
      return mse(m.denoise(x, 3, cond, {1, 1}), target);
    };

    Tensor loss = loss_value();
    for (auto& [name, p] : m.parameters()) p.zero_grad();
    backward(loss);

    Rng pick(47);
    int64_t checked = 0;
    while (checked < 30) {
      auto& [name, p] =
          m.parameters()[static_cast<size_t>(pick.uniform_int(
              0, static_cast<int64_t>(m.parameters().size()) - 1))];
      const size_t e = static_cast<size_t>(pick.uniform_int(0, p.size() - 1));
      const real h = 1e-5;
      const real saved = p.data()[e];
      p.mutable_data()[e] = saved + h;
      const real up = loss_value().item();
      p.mutable_data()[e] = saved - h;
      const real down = loss_value().item();
      p.mutable_data()[e] = saved;
      const real fd = (up - down) / (2 * h);
      const real ad = p.grad()[e];
      const real err = std::abs(fd - ad) / std::max({real(1), std::abs(fd), std::abs(ad)});
      CAPTURE(name);
      CHECK(err < 1e-4);
      ++checked;
    }
  }
}

TEST_SUITE("model.checkpoint") {
  TEST_CASE("round trip preserves config and outputs") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 29);
    const auto f = extract_features(probe_scene(2), cfg);
    const Tensor before = m.denoise(random_states(m, 2, 5), 2, m.encode(f));

    const std::string path = "./model.tmp.ckpt";
    save_checkpoint(path, m.to_checkpoint(R"({"note":"unit"})"));
    const Checkpoint ck = load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(ck.meta_json.find("\"note\":\"unit\"") != std::string::npos);
    CHECK(ck.meta_json.find("\"denoiser\"") != std::string::npos);

    Model back = Model::from_checkpoint(ck);
    CHECK(back.config().D == cfg.D);
    CHECK(back.config().augmented == cfg.augmented);
    const Tensor after = back.denoise(random_states(back, 2, 5), 2,
                                      back.encode(extract_features(probe_scene(2), cfg)));
    CHECK(max_abs_diff(before.data(), after.data()) == 0.0);
  }

  TEST_CASE("mismatched checkpoints are rejected") {
    const auto cfg = tiny_cfg();
    Model m(cfg, 31);
    Checkpoint ck = m.to_checkpoint();
    ck.params.pop_back();
    CHECK_THROWS_AS((void)Model::from_checkpoint(ck), ValidationError);
    ck = m.to_checkpoint();
    ck.params[0].first = "enc.hist.warped";
    CHECK_THROWS_AS((void)Model::from_checkpoint(ck), ValidationError);
    ck = m.to_checkpoint();
    ck.meta_json = "{}";
    CHECK_THROWS_AS((void)Model::from_checkpoint(ck), ValidationError);
  }
}
