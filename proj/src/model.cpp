#include "scenediff/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace scenediff {

namespace {

// Large negative sentinel for max-pool masking; chosen so that adding a
// normal activation back cancels exactly in double precision.
constexpr real kPoolMask = -1e9;

Tensor ones_col(int64_t rows) { return Tensor::full({rows, 1}, 1); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t rows = x.shape()[0];
  return add(matmul(x, w), matmul(ones_col(rows), b));
}

Tensor max_fold(const Tensor& a, const Tensor& b) { return add(a, relu(sub(b, a))); }

}  // namespace

std::vector<real> sinusoidal_embedding(real k, int64_t D) {
  if (D < 1) throw ValidationError("sinusoidal_embedding: D must be positive");
  std::vector<real> e(static_cast<size_t>(D));
  for (int64_t i = 0; i < D; i += 2) {
    const real freq = std::pow(real(10000), -static_cast<real>(i) / static_cast<real>(D));
    e[static_cast<size_t>(i)] = std::sin(k * freq);
    if (i + 1 < D) e[static_cast<size_t>(i + 1)] = std::cos(k * freq);
  }
  return e;
}

SceneFeatures extract_features(const SceneData& scene, const DenoiserConfig& cfg) {
  const int64_t n = static_cast<int64_t>(scene.agents.size());
  if (n == 0) throw ValidationError("extract_features: scene has no agents");
  if (n > cfg.N_max) {
    throw ValidationError("extract_features: " + std::to_string(n) + " agents exceed N_max=" +
                          std::to_string(cfg.N_max));
  }
  SceneFeatures f;
  f.n = n;
  f.F = cfg.T_hist * 5 + 3 + 2;
  f.agent.reserve(static_cast<size_t>(n * f.F));
  f.map_pts.assign(static_cast<size_t>(n * cfg.A * kMapPoints * 3), real(0));
  f.poly_valid.assign(static_cast<size_t>(n * cfg.A), 0);

  for (int64_t i = 0; i < n; ++i) {
    const AgentTrack& a = scene.agents[static_cast<size_t>(i)];
    if (static_cast<int64_t>(a.history.size()) < cfg.T_hist) {
      throw ValidationError("extract_features: agent history shorter than T_hist");
    }
    const size_t start = a.history.size() - static_cast<size_t>(cfg.T_hist);
    for (size_t t = start; t < a.history.size(); ++t) {
      const PoseState& p = a.history[t];
      f.agent.push_back(p.x);
      f.agent.push_back(p.y);
      f.agent.push_back(std::cos(p.heading));
      f.agent.push_back(std::sin(p.heading));
      f.agent.push_back(p.speed);
    }
    for (int type = 0; type < 3; ++type) {
      f.agent.push_back(static_cast<int>(a.type) == type ? 1.0 : 0.0);
    }
    f.agent.push_back(a.length);
    f.agent.push_back(a.width);

    // A nearest polylines by distance from the current pose, stable by index.
    const PoseState& anchor = a.history.back();
    std::vector<std::pair<real, size_t>> order;
    for (size_t l = 0; l < scene.map.size(); ++l) {
      order.emplace_back(point_to_polyline(anchor.x, anchor.y, scene.map[l]), l);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& p, const auto& q) { return p.first < q.first; });
    const int64_t picked = std::min<int64_t>(cfg.A, static_cast<int64_t>(order.size()));
    for (int64_t s = 0; s < picked; ++s) {
      const Polyline& line = scene.map[order[static_cast<size_t>(s)].second];
      f.poly_valid[static_cast<size_t>(i * cfg.A + s)] = 1;
      const int64_t npts = static_cast<int64_t>(line.points.size());
      for (int64_t j = 0; j < kMapPoints; ++j) {
        const int64_t src =
            npts == 1 ? 0 : (j * (npts - 1) + (kMapPoints - 1) / 2) / (kMapPoints - 1);
        const auto& p = line.points[static_cast<size_t>(std::min(src, npts - 1))];
        const size_t base =
            static_cast<size_t>(((i * cfg.A + s) * kMapPoints + j) * 3);
        f.map_pts[base + 0] = p[0] - anchor.x;
        f.map_pts[base + 1] = p[1] - anchor.y;
        f.map_pts[base + 2] = line.width;
      }
    }
  }
  return f;
}

Tensor Model::add_param(const std::string& name, Shape shape, Rng& rng, real scale) {
  Tensor t;
  if (scale == 0) {
    t = Tensor::zeros(shape, true);
  } else if (scale == -1) {  // layer-norm gain
    t = Tensor::full(shape, 1, true);
  } else {
    t = Tensor::randn(shape, rng, scale, true);
  }
  params_.emplace_back(name, t);
  return t;
}

Model::Model(const DenoiserConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.D < 1 || cfg_.heads < 1 || cfg_.D % cfg_.heads != 0) {
    throw ValidationError("model: D must be a positive multiple of heads");
  }
  if (cfg_.T < 2 || cfg_.H < 1 || cfg_.blocks < 1 || cfg_.T_hist < 1) {
    throw ValidationError("model: invalid dimensions");
  }
  Rng rng(seed);
  const int64_t D = cfg_.D;
  const int64_t F = cfg_.T_hist * 5 + 3 + 2;
  const int64_t C = channels();
  const real sF = real(1) / std::sqrt(static_cast<real>(F));
  const real sD = real(1) / std::sqrt(static_cast<real>(D));
  const real s3 = real(1) / std::sqrt(real(3));
  const real sC = real(1) / std::sqrt(static_cast<real>(C));

  add_param("enc.hist.w1", {F, D}, rng, sF);
  add_param("enc.hist.b1", {1, D}, rng, 0);
  add_param("enc.hist.w2", {D, D}, rng, sD);
  add_param("enc.hist.b2", {1, D}, rng, 0);
  add_param("enc.map.w1", {3, D}, rng, s3);
  add_param("enc.map.b1", {1, D}, rng, 0);
  add_param("enc.map.w2", {D, D}, rng, sD);
  add_param("enc.map.b2", {1, D}, rng, 0);
  add_param("step.w1", {D, D}, rng, sD);
  add_param("step.b1", {1, D}, rng, 0);
  add_param("step.w2", {D, D}, rng, sD);
  add_param("step.b2", {1, D}, rng, 0);
  add_param("state.w1", {C, D}, rng, sC);
  add_param("state.b1", {1, D}, rng, 0);
  add_param("state.w2", {D, D}, rng, sD);
  add_param("state.b2", {1, D}, rng, 0);
  for (int64_t b = 0; b < cfg_.blocks; ++b) {
    for (const char* sub : {"t", "a"}) {
      const std::string p = "blk" + std::to_string(b) + "." + sub + ".";
      add_param(p + "ln.g", {D}, rng, -1);
      add_param(p + "ln.b", {D}, rng, 0);
      for (const char* m : {"wq", "wk", "wv", "wo"}) add_param(p + m, {D, D}, rng, sD);
      for (const char* m : {"bq", "bk", "bv", "bo"}) add_param(p + m, {1, D}, rng, 0);
    }
    const std::string p = "blk" + std::to_string(b) + ".f.";
    add_param(p + "ln.g", {D}, rng, -1);
    add_param(p + "ln.b", {D}, rng, 0);
    add_param(p + "w1", {D, 2 * D}, rng, sD);
    add_param(p + "b1", {1, 2 * D}, rng, 0);
    add_param(p + "w2", {2 * D, D}, rng, real(1) / std::sqrt(static_cast<real>(2 * D)));
    add_param(p + "b2", {1, D}, rng, 0);
  }
  add_param("out.ln.g", {D}, rng, -1);
  add_param("out.ln.b", {D}, rng, 0);
  add_param("out.w1", {D, D}, rng, sD);
  add_param("out.b1", {1, D}, rng, 0);
  add_param("out.w2", {D, C}, rng, sD);
  add_param("out.b2", {1, C}, rng, 0);
}

Tensor Model::param(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ValidationError("model: no parameter named '" + name + "'");
}

Tensor Model::encode(const SceneFeatures& f, const std::vector<uint8_t>& mask) const {
  if (f.n < 1) throw ValidationError("encode: empty scene");
  if (!mask.empty() && static_cast<int64_t>(mask.size()) != f.n) {
    throw ShapeError("encode: mask length must equal agent count");
  }
  const int64_t D = cfg_.D, A = cfg_.A, n = f.n, P = kMapPoints;
  if (static_cast<int64_t>(f.agent.size()) != n * f.F) {
    throw ShapeError("encode: agent feature buffer has wrong size");
  }
  const Tensor hist_in = Tensor::from_data({n, f.F}, f.agent);
  Tensor h = linear(gelu(linear(hist_in, param("enc.hist.w1"), param("enc.hist.b1"))),
                    param("enc.hist.w2"), param("enc.hist.b2"));

  if (A > 0) {
    const Tensor pts = Tensor::from_data({n * A * P, 3}, f.map_pts);
    Tensor y = linear(gelu(linear(pts, param("enc.map.w1"), param("enc.map.b1"))),
                      param("enc.map.w2"), param("enc.map.b2"));
    y = transpose(reshape(y, {n * A, P, D}), {0, 2, 1});  // {n*A, D, P}
    Tensor pool = slice_last_axis(y, 0, 1);
    for (int64_t j = 1; j < P; ++j) {
      pool = max_fold(pool, slice_last_axis(y, j, j + 1));  // {n*A, D, 1}
    }
    // Knock invalid polyline slots out of the upcoming max over A.
    std::vector<real> slot_mask(static_cast<size_t>(n * A * D), 0);
    std::vector<real> agent_empty(static_cast<size_t>(n * D), 0);
    for (int64_t i = 0; i < n; ++i) {
      bool any = false;
      for (int64_t s = 0; s < A; ++s) {
        const bool ok = f.poly_valid[static_cast<size_t>(i * A + s)] != 0;
        any = any || ok;
        if (!ok) {
          for (int64_t d = 0; d < D; ++d) {
            slot_mask[static_cast<size_t>(((i * A + s) * D) + d)] = 1;
          }
        }
      }
      if (!any) {
        for (int64_t d = 0; d < D; ++d) agent_empty[static_cast<size_t>(i * D + d)] = 1;
      }
    }
    pool = masked_fill(pool, Tensor::from_data({n * A, D, 1}, slot_mask), kPoolMask);
    Tensor by_agent = transpose(reshape(pool, {n, A, D}), {0, 2, 1});  // {n, D, A}
    Tensor mp = slice_last_axis(by_agent, 0, 1);
    for (int64_t s = 1; s < A; ++s) {
      mp = max_fold(mp, slice_last_axis(by_agent, s, s + 1));
    }
    mp = reshape(mp, {n, D});
    mp = masked_fill(mp, Tensor::from_data({n, D}, agent_empty), 0);
    h = add(h, mp);
  }

  if (!mask.empty()) {
    std::vector<real> keep(static_cast<size_t>(n * D), 0);
    for (int64_t i = 0; i < n; ++i) {
      if (mask[static_cast<size_t>(i)]) {
        for (int64_t d = 0; d < D; ++d) keep[static_cast<size_t>(i * D + d)] = 1;
      }
    }
    h = mul(h, Tensor::from_data({n, D}, keep));
  }
  return h;
}

Tensor Model::attention(const Tensor& x, const std::string& prefix, int64_t n,
                        const std::vector<uint8_t>& mask, bool temporal) const {
  const int64_t D = cfg_.D, Tm = tokens(), S = n * Tm;
  const int64_t dh = D / cfg_.heads;
  Tensor hx = layer_norm(x, param(prefix + "ln.g"), param(prefix + "ln.b"));
  const Tensor q = linear(hx, param(prefix + "wq"), param(prefix + "bq"));
  const Tensor kk = linear(hx, param(prefix + "wk"), param(prefix + "bk"));
  const Tensor v = linear(hx, param(prefix + "wv"), param(prefix + "bv"));

  std::vector<real> block(static_cast<size_t>(S * S), 0);
  for (int64_t qi = 0; qi < S; ++qi) {
    const int64_t qa = qi / Tm, qt = qi % Tm;
    for (int64_t ki = 0; ki < S; ++ki) {
      const int64_t ka = ki / Tm, kt = ki % Tm;
      bool blocked = temporal ? (qa != ka) : (qt != kt);
      if (!mask.empty() && !mask[static_cast<size_t>(ka)]) blocked = true;
      if (blocked) block[static_cast<size_t>(qi * S + ki)] = 1;
    }
  }
  const Tensor pattern = Tensor::from_data({S, S}, std::move(block));
  const real scale = real(1) / std::sqrt(static_cast<real>(dh));

  Tensor merged;
  for (int64_t hd = 0; hd < cfg_.heads; ++hd) {
    const Tensor qh = slice_last_axis(q, hd * dh, (hd + 1) * dh);
    const Tensor kh = slice_last_axis(kk, hd * dh, (hd + 1) * dh);
    const Tensor vh = slice_last_axis(v, hd * dh, (hd + 1) * dh);
    Tensor scores = scalar_mul(matmul(qh, transpose(kh, {1, 0})), scale);
    scores = masked_fill(scores, pattern, real(-1e9));
    const Tensor oh = matmul(softmax_last_axis(scores), vh);
    merged = hd == 0 ? oh : concat_last_axis(merged, oh);
  }
  const Tensor o = linear(merged, param(prefix + "wo"), param(prefix + "bo"));
  return add(x, o);
}

Tensor Model::denoise(const Tensor& S_k, int64_t k, const Tensor& cond,
                      const std::vector<uint8_t>& mask) const {
  const int64_t D = cfg_.D, Tm = tokens(), C = channels();
  if (S_k.rank() != 3 || S_k.shape()[1] != Tm || S_k.shape()[2] != C) {
    throw ShapeError("denoise: state tensor must be {n, " + std::to_string(Tm) + ", " +
                     std::to_string(C) + "}, got " + shape_str(S_k.shape()));
  }
  const int64_t n = S_k.shape()[0];
  if (cond.rank() != 2 || cond.shape()[0] != n || cond.shape()[1] != D) {
    throw ShapeError("denoise: condition must be {" + std::to_string(n) + ", " +
                     std::to_string(D) + "}");
  }
  if (!mask.empty() && static_cast<int64_t>(mask.size()) != n) {
    throw ShapeError("denoise: mask length must equal agent count");
  }
  if (k < 1 || k > cfg_.K) {
    throw ValidationError("denoise: step " + std::to_string(k) + " outside [1, " +
                          std::to_string(cfg_.K) + "]");
  }
  const int64_t S = n * Tm;

  Tensor x = reshape(S_k, {S, C});
  x = linear(gelu(linear(x, param("state.w1"), param("state.b1"))), param("state.w2"),
             param("state.b2"));

  const Tensor kbase = Tensor::from_data({1, D}, sinusoidal_embedding(static_cast<real>(k), D));
  const Tensor kemb = linear(gelu(linear(kbase, param("step.w1"), param("step.b1"))),
                             param("step.w2"), param("step.b2"));
  x = add(x, matmul(ones_col(S), kemb));

  // Condition, broadcast across the sequence via a batched outer product.
  const Tensor bc = matmul(Tensor::full({n, Tm, 1}, 1), reshape(cond, {n, 1, D}));
  x = add(x, reshape(bc, {S, D}));

  // Fixed sinusoidal position code over the sequence index, shared by agents.
  std::vector<real> pe(static_cast<size_t>(S * D));
  for (int64_t t = 0; t < Tm; ++t) {
    const std::vector<real> row = sinusoidal_embedding(static_cast<real>(t), D);
    for (int64_t a = 0; a < n; ++a) {
      std::copy(row.begin(), row.end(), pe.begin() + (a * Tm + t) * D);
    }
  }
  x = add(x, Tensor::from_data({S, D}, std::move(pe)));

  for (int64_t b = 0; b < cfg_.blocks; ++b) {
    const std::string base = "blk" + std::to_string(b) + ".";
    x = attention(x, base + "t.", n, mask, true);
    if (cfg_.agent_attention) {
      x = attention(x, base + "a.", n, mask, false);
    }
    Tensor hf = layer_norm(x, param(base + "f.ln.g"), param(base + "f.ln.b"));
    hf = linear(gelu(linear(hf, param(base + "f.w1"), param(base + "f.b1"))),
                param(base + "f.w2"), param(base + "f.b2"));
    x = add(x, hf);
  }

  Tensor y = layer_norm(x, param("out.ln.g"), param("out.ln.b"));
  y = linear(gelu(linear(y, param("out.w1"), param("out.b1"))), param("out.w2"),
             param("out.b2"));

  if (!mask.empty()) {
    std::vector<real> keep(static_cast<size_t>(S * C), 0);
    for (int64_t i = 0; i < n; ++i) {
      if (mask[static_cast<size_t>(i)]) {
        std::fill(keep.begin() + i * Tm * C, keep.begin() + (i + 1) * Tm * C, real(1));
      }
    }
    y = mul(y, Tensor::from_data({S, C}, std::move(keep)));
  }
  return reshape(y, {n, Tm, C});
}

Checkpoint Model::to_checkpoint(const std::string& extra_meta) const {
  nlohmann::json meta;
  if (!extra_meta.empty()) {
    try {
      meta = nlohmann::json::parse(extra_meta);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("to_checkpoint: extra_meta is not JSON: ") + e.what());
    }
    if (!meta.is_object()) throw ValidationError("to_checkpoint: extra_meta must be an object");
  }
  meta["denoiser"] = nlohmann::json::parse(denoiser_to_json(cfg_));
  Checkpoint ck;
  ck.meta_json = meta.dump();
  ck.params = params_;
  return ck;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("from_checkpoint: bad metadata: ") + e.what());
  }
  if (!meta.contains("denoiser")) {
    throw ValidationError("from_checkpoint: metadata lacks a denoiser section");
  }
  Model model(denoiser_from_json(meta.at("denoiser").dump()), 0);
  if (ckpt.params.size() != model.params_.size()) {
    throw ValidationError("from_checkpoint: parameter count mismatch");
  }
  for (auto& [name, tensor] : model.params_) {
    const Tensor* stored = ckpt.find(name);
    if (stored == nullptr) {
      throw ValidationError("from_checkpoint: missing parameter '" + name + "'");
    }
    if (stored->shape() != tensor.shape()) {
      throw ValidationError("from_checkpoint: shape mismatch for '" + name + "'");
    }
    tensor.mutable_data() = stored->data();
  }
  return model;
}

}  // namespace scenediff
