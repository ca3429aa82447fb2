#include "scenediff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace scenediff {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<bool> g_finite_checks{false};

void check_finite(const char* kind, const Tensor& t) {
  if (!g_finite_checks.load(std::memory_order_relaxed)) return;
  for (real v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(kind) + ": non-finite input value");
    }
  }
}

[[noreturn]] void shape_fail(const char* kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(kind) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

using NodePtr = std::shared_ptr<detail::Node>;

Tensor make_node(const char* kind, Shape shape, std::vector<real> value,
                 std::vector<NodePtr> parents, std::function<void(detail::Node&)> backprop) {
  auto node = std::make_shared<detail::Node>();
  node->kind = kind;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return Tensor::wrap(std::move(node));
}

// Last axis length and the number of rows it tiles.
std::pair<int64_t, int64_t> rows_cols(const Shape& shape) {
  const int64_t cols = shape.empty() ? 1 : shape.back();
  return {numel(shape) / std::max<int64_t>(cols, 1), cols};
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (int64_t i = static_cast<int64_t>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * shape[i + 1];
  }
  return strides;
}

}  // namespace

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), real(0), requires_grad);
}

Tensor Tensor::full(Shape shape, real fill, bool requires_grad) {
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->value.assign(static_cast<size_t>(numel(shape)), fill);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<real> data, bool requires_grad) {
  if (numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
  Tensor t = full(std::move(shape), real(0), requires_grad);
  t.node_->value = std::move(data);
  return t;
}

Tensor Tensor::scalar(real v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, real stddev, bool requires_grad) {
  Tensor t = full(std::move(shape), real(0), requires_grad);
  for (auto& v : t.node_->value) v = static_cast<real>(rng.gaussian()) * stddev;
  return t;
}

const std::vector<real>& Tensor::grad() const {
  if (node_->grad.empty()) throw ValidationError("tensor has no gradient buffer");
  return node_->grad;
}

real Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is not scalar, shape " + shape_str(shape()));
  return node_->value[0];
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  check_finite("add", a);
  check_finite("add", b);
  std::vector<real> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_node("add", a.shape(), std::move(out), {a.handle(), b.handle()},
                   [](detail::Node& n) {
                     for (int pi = 0; pi < 2; ++pi) {
                       auto& p = *n.parents[pi];
                       if (!p.requires_grad) continue;
                       p.ensure_grad();
                       for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  check_finite("sub", a);
  check_finite("sub", b);
  std::vector<real> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_node("sub", a.shape(), std::move(out), {a.handle(), b.handle()},
                   [](detail::Node& n) {
                     auto& pa = *n.parents[0];
                     if (pa.requires_grad) {
                       pa.ensure_grad();
                       for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
                     }
                     auto& pb = *n.parents[1];
                     if (pb.requires_grad) {
                       pb.ensure_grad();
                       for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  check_finite("mul", a);
  check_finite("mul", b);
  std::vector<real> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_node("mul", a.shape(), std::move(out), {a.handle(), b.handle()},
                   [](detail::Node& n) {
                     auto& pa = *n.parents[0];
                     auto& pb = *n.parents[1];
                     if (pa.requires_grad) {
                       pa.ensure_grad();
                       for (size_t i = 0; i < n.grad.size(); ++i)
                         pa.grad[i] += n.grad[i] * pb.value[i];
                     }
                     if (pb.requires_grad) {
                       pb.ensure_grad();
                       for (size_t i = 0; i < n.grad.size(); ++i)
                         pb.grad[i] += n.grad[i] * pa.value[i];
                     }
                   });
}

Tensor scalar_mul(const Tensor& a, real c) {
  check_finite("scalar_mul", a);
  std::vector<real> out(a.data());
  for (auto& v : out) v *= c;
  return make_node("scalar_mul", a.shape(), std::move(out), {a.handle()},
                   [c](detail::Node& n) {
                     auto& p = *n.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += c * n.grad[i];
                   });
}

// --- matmul -----------------------------------------------------------------

namespace {

void gemm(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n,
          bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, real(0));
  for (int64_t i = 0; i < m; ++i) {
    const real* arow = a + i * k;
    real* crow = c + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const real av = arow[kk];
      if (av == real(0)) continue;
      const real* brow = b + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt(const real* a, const real* b, real* c, int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const real* arow = a + i * n;
    real* crow = c + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      const real* brow = b + kk * n;
      real acc = 0;
      for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[kk] += acc;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const real* a, const real* b, real* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const real* arow = a + i * k;
    const real* brow = b + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const real av = arow[kk];
      if (av == real(0)) continue;
      real* crow = c + kk * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

// Supports (m,k)x(k,n), batched (B...,m,k)x(B...,k,n), and (B...,m,k)x(k,n)
// where the rank-2 right operand is shared across the batch.
Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) shape_fail("matmul", sa, sb);
  const bool shared_rhs = sb.size() == 2 && sa.size() > 2;
  if (!shared_rhs && sa.size() != sb.size()) shape_fail("matmul", sa, sb);
  if (!shared_rhs) {
    for (size_t i = 0; i + 2 < sa.size(); ++i) {
      if (sa[i] != sb[i]) shape_fail("matmul", sa, sb);
    }
  }
  const int64_t m = sa[sa.size() - 2];
  const int64_t k = sa[sa.size() - 1];
  if (sb[sb.size() - 2] != k) shape_fail("matmul", sa, sb);
  const int64_t n = sb[sb.size() - 1];
  int64_t batch = 1;
  for (size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
  check_finite("matmul", a);
  check_finite("matmul", b);

  Shape out_shape(sa.begin(), sa.end() - 1);  // leading dims + m
  out_shape.push_back(n);

  std::vector<real> out(static_cast<size_t>(batch * m * n));
  for (int64_t bi = 0; bi < batch; ++bi) {
    const real* ap = a.data().data() + bi * m * k;
    const real* bp = b.data().data() + (shared_rhs ? 0 : bi * k * n);
    gemm(ap, bp, out.data() + bi * m * n, m, k, n, false);
  }

  return make_node("matmul", std::move(out_shape), std::move(out), {a.handle(), b.handle()},
                   [m, k, n, batch, shared_rhs](detail::Node& node) {
                     auto& pa = *node.parents[0];
                     auto& pb = *node.parents[1];
                     for (int64_t bi = 0; bi < batch; ++bi) {
                       const real* g = node.grad.data() + bi * m * n;
                       const real* av = pa.value.data() + bi * m * k;
                       const real* bv = pb.value.data() + (shared_rhs ? 0 : bi * k * n);
                       if (pa.requires_grad) {
                         pa.ensure_grad();
                         gemm_nt(g, bv, pa.grad.data() + bi * m * k, m, n, k);
                       }
                       if (pb.requires_grad) {
                         pb.ensure_grad();
                         gemm_tn(av, g, pb.grad.data() + (shared_rhs ? 0 : bi * k * n), m, k, n);
                       }
                     }
                   });
}

// --- movement ---------------------------------------------------------------

Tensor transpose(const Tensor& a, const std::vector<int64_t>& perm) {
  const Shape& s = a.shape();
  const auto r = s.size();
  if (perm.size() != r) {
    throw ShapeError("transpose: permutation size " + std::to_string(perm.size()) +
                     " vs rank " + std::to_string(r));
  }
  std::vector<bool> seen(r, false);
  for (int64_t p : perm) {
    if (p < 0 || p >= static_cast<int64_t>(r) || seen[p]) {
      throw ShapeError("transpose: invalid permutation");
    }
    seen[p] = true;
  }
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) out_shape[i] = s[perm[i]];

  const auto in_strides = row_major_strides(s);
  const auto out_strides = row_major_strides(out_shape);
  const int64_t n = numel(s);
  std::vector<real> out(static_cast<size_t>(n));
  const auto& av = a.data();
  for (int64_t lin = 0; lin < n; ++lin) {
    int64_t rem = lin;
    int64_t src = 0;
    for (size_t d = 0; d < r; ++d) {
      const int64_t coord = rem / out_strides[d];
      rem %= out_strides[d];
      src += coord * in_strides[perm[d]];
    }
    out[static_cast<size_t>(lin)] = av[static_cast<size_t>(src)];
  }

  std::vector<int64_t> perm_copy = perm;
  return make_node("transpose", std::move(out_shape), std::move(out), {a.handle()},
                   [perm_copy](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     const auto in_strides = row_major_strides(p.shape);
                     const auto out_strides = row_major_strides(node.shape);
                     const int64_t n = numel(node.shape);
                     const size_t r = perm_copy.size();
                     for (int64_t lin = 0; lin < n; ++lin) {
                       int64_t rem = lin;
                       int64_t src = 0;
                       for (size_t d = 0; d < r; ++d) {
                         const int64_t coord = rem / out_strides[d];
                         rem %= out_strides[d];
                         src += coord * in_strides[perm_copy[d]];
                       }
                       p.grad[static_cast<size_t>(src)] += node.grad[static_cast<size_t>(lin)];
                     }
                   });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
  return make_node("reshape", std::move(shape), a.data(), {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
                   });
}

Tensor concat_last_axis(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty()) shape_fail("concat_last_axis", sa, sb);
  for (size_t i = 0; i + 1 < sa.size(); ++i) {
    if (sa[i] != sb[i]) shape_fail("concat_last_axis", sa, sb);
  }
  const int64_t ca = sa.back();
  const int64_t cb = sb.back();
  const int64_t rows = numel(sa) / ca;
  Shape out_shape = sa;
  out_shape.back() = ca + cb;
  std::vector<real> out(static_cast<size_t>(rows * (ca + cb)));
  const auto& av = a.data();
  const auto& bv = b.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * ca, ca, out.begin() + r * (ca + cb));
    std::copy_n(bv.begin() + r * cb, cb, out.begin() + r * (ca + cb) + ca);
  }
  return make_node("concat_last_axis", std::move(out_shape), std::move(out),
                   {a.handle(), b.handle()},
                   [ca, cb, rows](detail::Node& node) {
                     auto& pa = *node.parents[0];
                     auto& pb = *node.parents[1];
                     if (pa.requires_grad) pa.ensure_grad();
                     if (pb.requires_grad) pb.ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       const real* g = node.grad.data() + r * (ca + cb);
                       if (pa.requires_grad) {
                         real* gp = pa.grad.data() + r * ca;
                         for (int64_t i = 0; i < ca; ++i) gp[i] += g[i];
                       }
                       if (pb.requires_grad) {
                         real* gp = pb.grad.data() + r * cb;
                         for (int64_t i = 0; i < cb; ++i) gp[i] += g[ca + i];
                       }
                     }
                   });
}

Tensor slice_last_axis(const Tensor& a, int64_t lo, int64_t hi) {
  const Shape& s = a.shape();
  if (s.empty()) throw ShapeError("slice_last_axis: rank-0 input");
  const int64_t c = s.back();
  if (lo < 0 || hi <= lo || hi > c) {
    throw ShapeError("slice_last_axis: bounds [" + std::to_string(lo) + "," +
                     std::to_string(hi) + ") outside extent " + std::to_string(c));
  }
  const int64_t rows = numel(s) / c;
  const int64_t w = hi - lo;
  Shape out_shape = s;
  out_shape.back() = w;
  std::vector<real> out(static_cast<size_t>(rows * w));
  const auto& av = a.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * c + lo, w, out.begin() + r * w);
  }
  return make_node("slice_last_axis", std::move(out_shape), std::move(out), {a.handle()},
                   [lo, w, c, rows](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       const real* g = node.grad.data() + r * w;
                       real* gp = p.grad.data() + r * c + lo;
                       for (int64_t i = 0; i < w; ++i) gp[i] += g[i];
                     }
                   });
}

// --- nonlinear --------------------------------------------------------------

Tensor softmax_last_axis(const Tensor& a) {
  check_finite("softmax_last_axis", a);
  const auto [rows, cols] = rows_cols(a.shape());
  std::vector<real> out(a.data().size());
  const auto& av = a.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real* x = av.data() + r * cols;
    real* y = out.data() + r * cols;
    real mx = x[0];
    for (int64_t i = 1; i < cols; ++i) mx = std::max(mx, x[i]);
    real z = 0;
    for (int64_t i = 0; i < cols; ++i) {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
    for (int64_t i = 0; i < cols; ++i) y[i] /= z;
  }
  return make_node("softmax_last_axis", a.shape(), std::move(out), {a.handle()},
                   [rows = rows, cols = cols](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (int64_t r = 0; r < rows; ++r) {
                       const real* y = node.value.data() + r * cols;
                       const real* g = node.grad.data() + r * cols;
                       real dot = 0;
                       for (int64_t i = 0; i < cols; ++i) dot += y[i] * g[i];
                       real* gp = p.grad.data() + r * cols;
                       for (int64_t i = 0; i < cols; ++i) gp[i] += y[i] * (g[i] - dot);
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps) {
  const auto [rows, cols] = rows_cols(x.shape());
  if (gamma.shape() != Shape{cols} || beta.shape() != Shape{cols}) {
    throw ShapeError("layer_norm: gamma/beta must have shape (" + std::to_string(cols) + ")");
  }
  check_finite("layer_norm", x);
  std::vector<real> out(x.data().size());
  std::vector<real> xhat(x.data().size());
  std::vector<real> inv_std(static_cast<size_t>(rows));
  const auto& xv = x.data();
  const auto& gv = gamma.data();
  const auto& bv = beta.data();
  for (int64_t r = 0; r < rows; ++r) {
    const real* xr = xv.data() + r * cols;
    real mean = 0;
    for (int64_t i = 0; i < cols; ++i) mean += xr[i];
    mean /= static_cast<real>(cols);
    real var = 0;
    for (int64_t i = 0; i < cols; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<real>(cols);
    const real is = real(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t i = 0; i < cols; ++i) {
      const real h = (xr[i] - mean) * is;
      xhat[static_cast<size_t>(r * cols + i)] = h;
      out[static_cast<size_t>(r * cols + i)] = gv[i] * h + bv[i];
    }
  }
  return make_node(
      "layer_norm", x.shape(), std::move(out), {x.handle(), gamma.handle(), beta.handle()},
      [rows = rows, cols = cols, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node& node) {
        auto& px = *node.parents[0];
        auto& pg = *node.parents[1];
        auto& pb = *node.parents[2];
        const auto& gv = pg.value;
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
          const real* g = node.grad.data() + r * cols;
          const real* h = xhat.data() + r * cols;
          if (pg.requires_grad || pb.requires_grad) {
            for (int64_t i = 0; i < cols; ++i) {
              if (pg.requires_grad) pg.grad[static_cast<size_t>(i)] += g[i] * h[i];
              if (pb.requires_grad) pb.grad[static_cast<size_t>(i)] += g[i];
            }
          }
          if (px.requires_grad) {
            real mean_dh = 0;
            real mean_dh_h = 0;
            for (int64_t i = 0; i < cols; ++i) {
              const real dh = g[i] * gv[static_cast<size_t>(i)];
              mean_dh += dh;
              mean_dh_h += dh * h[i];
            }
            mean_dh /= static_cast<real>(cols);
            mean_dh_h /= static_cast<real>(cols);
            const real is = inv_std[static_cast<size_t>(r)];
            real* gp = px.grad.data() + r * cols;
            for (int64_t i = 0; i < cols; ++i) {
              const real dh = g[i] * gv[static_cast<size_t>(i)];
              gp[i] += (dh - mean_dh - h[i] * mean_dh_h) * is;
            }
          }
        }
      });
}

Tensor relu(const Tensor& a) {
  std::vector<real> out(a.data());
  for (auto& v : out) v = std::max(v, real(0));
  return make_node("relu", a.shape(), std::move(out), {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i) {
                       if (p.value[i] > real(0)) p.grad[i] += node.grad[i];
                     }
                   });
}

namespace {
constexpr real kInvSqrt2 = real(0.70710678118654752440);
constexpr real kInvSqrt2Pi = real(0.39894228040143267794);
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<real> out(a.data());
  for (auto& v : out) {
    const real phi = real(0.5) * (real(1) + std::erf(v * kInvSqrt2));
    v = v * phi;
  }
  return make_node("gelu", a.shape(), std::move(out), {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i) {
                       const real x = p.value[i];
                       const real phi = real(0.5) * (real(1) + std::erf(x * kInvSqrt2));
                       const real pdf = kInvSqrt2Pi * std::exp(real(-0.5) * x * x);
                       p.grad[i] += node.grad[i] * (phi + x * pdf);
                     }
                   });
}

Tensor sin(const Tensor& a) {
  std::vector<real> out(a.data());
  for (auto& v : out) v = std::sin(v);
  return make_node("sin", a.shape(), std::move(out), {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i)
                       p.grad[i] += node.grad[i] * std::cos(p.value[i]);
                   });
}

Tensor cos(const Tensor& a) {
  std::vector<real> out(a.data());
  for (auto& v : out) v = std::cos(v);
  return make_node("cos", a.shape(), std::move(out), {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i)
                       p.grad[i] -= node.grad[i] * std::sin(p.value[i]);
                   });
}

// --- reductions -------------------------------------------------------------

Tensor mean_all(const Tensor& a) {
  check_finite("mean_all", a);
  const real n = static_cast<real>(a.size());
  real acc = 0;
  for (real v : a.data()) acc += v;
  return make_node("mean_all", {1}, {acc / n}, {a.handle()},
                   [n](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     const real g = node.grad[0] / n;
                     for (auto& gv : p.grad) gv += g;
                   });
}

Tensor sum_all(const Tensor& a) {
  check_finite("sum_all", a);
  real acc = 0;
  for (real v : a.data()) acc += v;
  return make_node("sum_all", {1}, {acc}, {a.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     const real g = node.grad[0];
                     for (auto& gv : p.grad) gv += g;
                   });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) shape_fail("mse", pred.shape(), target.shape());
  check_finite("mse", pred);
  check_finite("mse", target);
  const real n = static_cast<real>(pred.size());
  real acc = 0;
  const auto& pv = pred.data();
  const auto& tv = target.data();
  for (size_t i = 0; i < pv.size(); ++i) {
    const real d = pv[i] - tv[i];
    acc += d * d;
  }
  return make_node("mse", {1}, {acc / n}, {pred.handle(), target.handle()},
                   [n](detail::Node& node) {
                     auto& pp = *node.parents[0];
                     auto& pt = *node.parents[1];
                     const real g = node.grad[0] * real(2) / n;
                     if (pp.requires_grad) {
                       pp.ensure_grad();
                       for (size_t i = 0; i < pp.value.size(); ++i)
                         pp.grad[i] += g * (pp.value[i] - pt.value[i]);
                     }
                     if (pt.requires_grad) {
                       pt.ensure_grad();
                       for (size_t i = 0; i < pt.value.size(); ++i)
                         pt.grad[i] -= g * (pp.value[i] - pt.value[i]);
                     }
                   });
}

Tensor abs_mean(const Tensor& a) {
  check_finite("abs_mean", a);
  const real n = static_cast<real>(a.size());
  real acc = 0;
  for (real v : a.data()) acc += std::abs(v);
  return make_node("abs_mean", {1}, {acc / n}, {a.handle()},
                   [n](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     const real g = node.grad[0] / n;
                     for (size_t i = 0; i < p.value.size(); ++i) {
                       const real x = p.value[i];
                       if (x > real(0)) p.grad[i] += g;
                       else if (x < real(0)) p.grad[i] -= g;
                     }
                   });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids) {
  const Shape& s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding_lookup: table must be rank 2");
  const int64_t vocab = s[0];
  const int64_t dim = s[1];
  for (int64_t id : ids) {
    if (id < 0 || id >= vocab) {
      throw ValidationError("embedding_lookup: id " + std::to_string(id) +
                            " outside vocabulary " + std::to_string(vocab));
    }
  }
  const int64_t n = static_cast<int64_t>(ids.size());
  std::vector<real> out(static_cast<size_t>(n * dim));
  const auto& tv = table.data();
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(tv.begin() + ids[static_cast<size_t>(i)] * dim, dim, out.begin() + i * dim);
  }
  std::vector<int64_t> ids_copy = ids;
  return make_node("embedding_lookup", {n, dim}, std::move(out), {table.handle()},
                   [ids_copy, dim](detail::Node& node) {
                     auto& p = *node.parents[0];
                     p.ensure_grad();
                     for (size_t i = 0; i < ids_copy.size(); ++i) {
                       const real* g = node.grad.data() + static_cast<int64_t>(i) * dim;
                       real* gp = p.grad.data() + ids_copy[i] * dim;
                       for (int64_t d = 0; d < dim; ++d) gp[d] += g[d];
                     }
                   });
}

Tensor masked_fill(const Tensor& a, const Tensor& mask, real fill) {
  if (a.shape() != mask.shape()) shape_fail("masked_fill", a.shape(), mask.shape());
  std::vector<real> out(a.data());
  const auto& mv = mask.data();
  for (size_t i = 0; i < out.size(); ++i) {
    if (mv[i] != real(0)) out[i] = fill;
  }
  return make_node("masked_fill", a.shape(), std::move(out), {a.handle(), mask.handle()},
                   [](detail::Node& node) {
                     auto& p = *node.parents[0];
                     auto& m = *node.parents[1];
                     if (!p.requires_grad) return;
                     p.ensure_grad();
                     for (size_t i = 0; i < node.grad.size(); ++i) {
                       if (m.value[i] == real(0)) p.grad[i] += node.grad[i];
                     }
                   });
}

// --- backward ---------------------------------------------------------------

namespace {

void topo_collect(detail::Node* root, std::vector<detail::Node*>& order) {
  // Iterative post-order DFS; parents are visited in recording order, so the
  // resulting order is deterministic for identical graphs.
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next].get();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, shape " + shape_str(loss.shape()));
  }
  detail::Node* root = loss.node();
  if (!root->requires_grad) {
    throw ValidationError("backward: loss does not depend on any requires_grad tensor");
  }
  std::vector<detail::Node*> order;
  topo_collect(root, order);
  // Interior gradients are scratch space for this sweep; leaf gradients
  // persist so repeated calls accumulate.
  for (detail::Node* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), real(0));
    else node->ensure_grad();
  }
  root->grad[0] += real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

int64_t graph_node_count(const Tensor& root) {
  std::unordered_set<detail::Node*> visited;
  std::vector<detail::Node*> stack{root.node()};
  visited.insert(root.node());
  while (!stack.empty()) {
    detail::Node* node = stack.back();
    stack.pop_back();
    for (const auto& p : node->parents) {
      if (visited.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  return static_cast<int64_t>(visited.size());
}

// --- Adam -------------------------------------------------------------------

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
  if (cfg.lr <= real(0)) throw ValidationError("adam_step: lr must be positive");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].data().size(), real(0));
      state.v[i].assign(params[i].data().size(), real(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ValidationError("adam_step: state does not match parameter count");
  }
  state.step += 1;
  const real bc1 = real(1) - std::pow(cfg.beta1, static_cast<real>(state.step));
  const real bc2 = real(1) - std::pow(cfg.beta2, static_cast<real>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto* node = params[i].node();
    node->ensure_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != node->value.size()) {
      throw ValidationError("adam_step: state buffer shape mismatch");
    }
    for (size_t j = 0; j < node->value.size(); ++j) {
      const real g = node->grad[j];
      m[j] = cfg.beta1 * m[j] + (real(1) - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (real(1) - cfg.beta2) * g * g;
      const real mhat = m[j] / bc1;
      const real vhat = v[j] / bc2;
      node->value[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace scenediff
