#include <cmath>
#include <vector>

#include "doctest.h"
#include "scenediff/augment.hpp"
#include "scenediff/schedule.hpp"

using namespace scenediff;

namespace {

// Single-step schedule whose alpha_bar[1] is exactly the requested value.
NoiseSchedule pinned_alpha_bar(real ab) {
  NoiseSchedule s;
  s.K = 1;
  s.beta = {real(1) - ab};
  s.alpha_bar = {real(1), ab};
  return s;
}

}  // namespace

TEST_SUITE("schedule.make") {
  TEST_CASE("two-step linear hand values") {
    NoiseSchedule s = make_schedule(ScheduleKind::linear, 2, 0.1, 0.2);
    REQUIRE(s.alpha_bar.size() == 3);
    CHECK(s.alpha_bar[0] == 1.0);
    CHECK(s.alpha_bar[1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.alpha_bar[2] == doctest::Approx(0.72).epsilon(1e-12));
  }

  TEST_CASE("invariants hold for both kinds") {
    for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
      for (int64_t K : {2LL, 10LL, 100LL}) {
        NoiseSchedule s = make_schedule(kind, K, 1e-4, 0.02);
        REQUIRE(s.beta.size() == static_cast<size_t>(K));
        CHECK(s.alpha_bar[0] == 1.0);
        long double prod = 1.0L;
        for (int64_t k = 1; k <= K; ++k) {
          CHECK(s.beta[k - 1] > 0.0);
          CHECK(s.beta[k - 1] < 1.0);
          CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);  // strictly decreasing
          prod *= 1.0L - static_cast<long double>(s.beta[k - 1]);
          CHECK(std::abs(s.alpha_bar[k] - static_cast<real>(prod)) < 1e-12);
        }
        CHECK(s.alpha_bar[K] > 0.0);
        CHECK(s.alpha_bar[1] < 1.0);
      }
    }
  }

  TEST_CASE("long linear schedule drives signal fraction below 1%") {
    NoiseSchedule s = make_schedule(ScheduleKind::linear, 500, 1e-4, 0.02);
    // Independent product evaluation in extended precision.
    long double prod = 1.0L;
    for (int64_t j = 0; j < 500; ++j) {
      const long double beta = 1e-4L + (0.02L - 1e-4L) * static_cast<long double>(j) / 499.0L;
      prod *= 1.0L - beta;
    }
    CHECK(prod < 0.01L);
    CHECK(s.alpha_bar[500] == doctest::Approx(static_cast<double>(prod)).epsilon(1e-10));
    CHECK(s.alpha_bar[500] < 0.01);
  }

  TEST_CASE("invalid arguments rejected") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 1, 0.1, 0.2), ValidationError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.2, 0.1), ValidationError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.0, 0.1), ValidationError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 10, 0.1, 1.0), ValidationError);
    CHECK_THROWS_AS(schedule_kind_from_string("quadratic"), ValidationError);
    CHECK(schedule_kind_from_string("linear") == ScheduleKind::linear);
    CHECK(schedule_kind_from_string("cosine") == ScheduleKind::cosine);
  }
}

TEST_SUITE("schedule.diffuse") {
  TEST_CASE("hand value at alpha_bar 0.25") {
    NoiseSchedule s = pinned_alpha_bar(0.25);
    std::vector<real> out = diffuse({2.0}, 1, {1.0}, s);
    CHECK(out[0] == doctest::Approx(1.8660254).epsilon(1e-7));
  }

  TEST_CASE("zero noise scales signal") {
    NoiseSchedule s = pinned_alpha_bar(0.49);
    std::vector<real> out = diffuse({3.0, -1.0}, 1, {0.0, 0.0}, s);
    CHECK(out[0] == doctest::Approx(0.7 * 3.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.7 * -1.0).epsilon(1e-12));
  }

  TEST_CASE("step zero is the identity endpoint") {
    NoiseSchedule s = make_schedule(ScheduleKind::linear, 4, 0.1, 0.3);
    std::vector<real> s0{1.5, -2.25, 0.0};
    CHECK(diffuse(s0, 0, {9.0, 9.0, 9.0}, s) == s0);
  }

  TEST_CASE("marginal statistics across many draws") {
    NoiseSchedule s = pinned_alpha_bar(0.36);
    const real s0 = 1.7;
    const int n = 100000;
    Rng rng(2024);
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
      const real v = diffuse({s0}, 1, {static_cast<real>(rng.gaussian())}, s)[0];
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double expected_mean = 0.6 * s0;
    const double expected_var = 1 - 0.36;
    CHECK(std::abs(mean - expected_mean) < 3 * std::sqrt(expected_var) / std::sqrt(double(n)));
    CHECK(std::abs(var - expected_var) < 0.02 * expected_var);
  }

  TEST_CASE("linear superposition") {
    NoiseSchedule s = make_schedule(ScheduleKind::linear, 6, 0.05, 0.3);
    Rng rng(5);
    std::vector<real> a = rng.gaussian_vec(8), b = rng.gaussian_vec(8);
    std::vector<real> ea = rng.gaussian_vec(8), eb = rng.gaussian_vec(8);
    std::vector<real> ab(8), eab(8);
    for (int i = 0; i < 8; ++i) {
      ab[i] = a[i] + b[i];
      eab[i] = ea[i] + eb[i];
    }
    std::vector<real> lhs = diffuse(ab, 3, eab, s);
    std::vector<real> ra = diffuse(a, 3, ea, s), rb = diffuse(b, 3, eb, s);
    for (int i = 0; i < 8; ++i) {
      CHECK(lhs[i] == doctest::Approx(ra[i] + rb[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("step bounds enforced") {
    NoiseSchedule s = make_schedule(ScheduleKind::linear, 4, 0.1, 0.3);
    CHECK_THROWS_AS(diffuse({1.0}, -1, {0.0}, s), ValidationError);
    CHECK_THROWS_AS(diffuse({1.0}, 5, {0.0}, s), ValidationError);
    CHECK_THROWS_AS(diffuse({1.0, 2.0}, 1, {0.0}, s), ShapeError);
  }
}

TEST_SUITE("schedule.diffuse_augmented") {
  TEST_CASE("overlap structure survives the affine map") {
    Rng rng(77);
    const int64_t N = 2, T = 6, H = 3;
    std::vector<real> s0 = rng.gaussian_vec(N * T * H);
    std::vector<real> eps0 = rng.gaussian_vec(N * T * H);
    std::vector<real> S0 = augment(s0, N, T, H);
    std::vector<real> E = augment_noise(eps0, N, T, H);
    NoiseSchedule sched = make_schedule(ScheduleKind::linear, 10, 0.02, 0.3);
    std::vector<real> Sk = diffuse_augmented(S0, N, T - 1, 2 * H, 7, E, sched);
    CHECK(overlap_consistent(Sk, N, T - 1, 2 * H, 1e-14));
  }

  TEST_CASE("zero signal at final step leaves scaled noise") {
    const int64_t N = 1, T = 3, H = 1;
    std::vector<real> eps0{0.5, -1.0, 2.0};
    std::vector<real> E = augment_noise(eps0, N, T, H);
    std::vector<real> S0(E.size(), 0.0);
    NoiseSchedule sched = pinned_alpha_bar(0.25);
    std::vector<real> Sk = diffuse_augmented(S0, N, T - 1, 2 * H, 1, E, sched);
    const real cn = std::sqrt(real(0.75));
    for (size_t i = 0; i < E.size(); ++i) {
      CHECK(Sk[i] == doctest::Approx(cn * E[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("scalar halves reuse the plain diffusion value") {
    const int64_t N = 1, T = 3, H = 1;
    std::vector<real> s0{2.0, 2.0, 2.0};
    std::vector<real> eps0{1.0, 1.0, 1.0};
    NoiseSchedule sched = pinned_alpha_bar(0.25);
    std::vector<real> Sk = diffuse_augmented(augment(s0, N, T, H), N, T - 1, 2 * H, 1,
                                             augment_noise(eps0, N, T, H), sched);
    for (real v : Sk) CHECK(v == doctest::Approx(1.8660254).epsilon(1e-7));
  }

  TEST_CASE("independent noise rejected") {
    Rng rng(3);
    const int64_t N = 1, T = 4, H = 2;
    std::vector<real> S0 = augment(rng.gaussian_vec(N * T * H), N, T, H);
    std::vector<real> bad = rng.gaussian_vec(S0.size());  // no shared halves
    NoiseSchedule sched = make_schedule(ScheduleKind::linear, 5, 0.1, 0.3);
    CHECK_THROWS_AS(diffuse_augmented(S0, N, T - 1, 2 * H, 2, bad, sched), ValidationError);
  }
}
