#include "scenediff/augment.hpp"

#include <cmath>
#include <string>

namespace scenediff {

namespace {

void check_dims(size_t have, int64_t want, const char* what) {
  if (static_cast<int64_t>(have) != want) {
    throw ShapeError(std::string(what) + ": array holds " + std::to_string(have) +
                     " values, dims imply " + std::to_string(want));
  }
}

}  // namespace

std::vector<real> augment(const std::vector<real>& x, int64_t N, int64_t T, int64_t H) {
  if (T < 2) throw ValidationError("augment: needs at least two steps, got T=" + std::to_string(T));
  check_dims(x.size(), N * T * H, "augment");
  const int64_t Tm = T - 1;
  std::vector<real> out(static_cast<size_t>(N * Tm * 2 * H));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t t = 0; t < Tm; ++t) {
      const real* cur = x.data() + (n * T + t) * H;
      real* el = out.data() + (n * Tm + t) * 2 * H;
      for (int64_t h = 0; h < H; ++h) {
        el[h] = cur[h];
        el[H + h] = cur[H + h];  // state t+1 is contiguous after state t
      }
    }
  }
  return out;
}

std::vector<real> augment_noise(const std::vector<real>& eps0, int64_t N, int64_t T, int64_t H) {
  return augment(eps0, N, T, H);
}

std::vector<real> de_augment(const std::vector<real>& S, int64_t N, int64_t Tm, int64_t H2) {
  if (H2 % 2 != 0) throw ShapeError("de_augment: last extent must be even");
  if (Tm < 1) throw ValidationError("de_augment: needs at least one element");
  check_dims(S.size(), N * Tm * H2, "de_augment");
  const int64_t H = H2 / 2;
  const int64_t T = Tm + 1;
  std::vector<real> out(static_cast<size_t>(N * T * H));
  for (int64_t n = 0; n < N; ++n) {
    const real* first = S.data() + (n * Tm + 0) * H2;
    const real* last = S.data() + (n * Tm + (Tm - 1)) * H2;
    for (int64_t h = 0; h < H; ++h) {
      out[(n * T + 0) * H + h] = first[h];
      out[(n * T + (T - 1)) * H + h] = last[H + h];
    }
    for (int64_t t = 1; t < T - 1; ++t) {
      const real* prev = S.data() + (n * Tm + (t - 1)) * H2;  // rear holds state t
      const real* cur = S.data() + (n * Tm + t) * H2;         // front holds state t
      for (int64_t h = 0; h < H; ++h) {
        out[(n * T + t) * H + h] = (prev[H + h] + cur[h]) / real(2);
      }
    }
  }
  return out;
}

std::vector<real> half_difference(const std::vector<real>& S, int64_t rows, int64_t H2) {
  if (H2 % 2 != 0) throw ShapeError("half_difference: last extent must be even");
  check_dims(S.size(), rows * H2, "half_difference");
  const int64_t H = H2 / 2;
  std::vector<real> out(static_cast<size_t>(rows * H));
  for (int64_t r = 0; r < rows; ++r) {
    const real* el = S.data() + r * H2;
    for (int64_t h = 0; h < H; ++h) out[r * H + h] = el[H + h] - el[h];
  }
  return out;
}

bool overlap_consistent(const std::vector<real>& S, int64_t N, int64_t Tm, int64_t H2,
                        real tol) {
  if (H2 % 2 != 0) throw ShapeError("overlap_consistent: last extent must be even");
  check_dims(S.size(), N * Tm * H2, "overlap_consistent");
  const int64_t H = H2 / 2;
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t t = 0; t + 1 < Tm; ++t) {
      const real* el = S.data() + (n * Tm + t) * H2;
      const real* nxt = S.data() + (n * Tm + t + 1) * H2;
      for (int64_t h = 0; h < H; ++h) {
        if (std::abs(el[H + h] - nxt[h]) > tol) return false;
      }
    }
  }
  return true;
}

}  // namespace scenediff
