#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pdlearn/baselines.hpp"

using namespace pdlearn;

namespace {

// Direct 2-D grid search over [0, cap]^2.
double grid_best_2user(const Mat& g, const Vec& v, const Vec& w, double cap, int n) {
  double best = -1.0;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; b <= n; ++b) {
      const Vec p = (Vec(2) << cap * a / n, cap * b / n).finished();
      best = std::max(best, weighted_sum_rate(g, p, v, w));
    }
  return best;
}

}  // namespace

TEST_CASE("waterfilling threshold and cap") {
  // Below the cutoff v mu / lambda the channel gets nothing.
  CHECK(waterfill(1.0, 2.0, 0.5, 1.0, 10.0) == 0.0);
  CHECK(waterfill(1.0, 0.5, 4.0, 1.0, 10.0) == doctest::Approx(1.75));
  CHECK(waterfill(1.0, 0.01, 4.0, 1.0, 10.0) == 10.0);
}

TEST_CASE("waterfilling maximizes the pointwise Lagrangian") {
  for (const auto& [lam, mu, h, v] : std::vector<std::array<double, 4>>{
           {1.0, 0.3, 0.7, 1.2}, {0.6, 0.1, 2.0, 0.5}, {1.4, 1.0, 0.2, 1.0}}) {
    const auto obj = [&](double p) { return lam * std::log1p(h * p / v) - mu * p; };
    const double p_grid = oracles::grid_argmax(obj, 0.0, 10.0, 200001);
    CHECK(std::abs(waterfill(lam, mu, h, v, 10.0) - p_grid) <= 1e-4);
  }
}

TEST_CASE("equal power spends the budget on every draw") {
  const AwgnConfig cfg = make_awgn_config(20, 20.0, 1);
  const ProblemBundle b = build_awgn(cfg);
  const AllocationFn pol = equal_power_policy(20, 20.0);
  Rng rng(1);
  CHECK(pol(Vec::Ones(20), rng).isApprox(Vec::Ones(20)));
  const PolicyEvaluation e = evaluate_policy(b.problem, pol, 2000, 7);
  CHECK(std::abs(e.power_residual) <= 1e-9);
  CHECK(e.min_draw_power == doctest::Approx(20.0));
  CHECK(e.max_draw_power == doctest::Approx(20.0));
}

TEST_CASE("random-k draws exactly k active users") {
  Rng rng(2);
  for (const auto& [k, power, total] : std::vector<std::array<double, 3>>{{4, 5, 20}, {3, 6, 18}}) {
    const AllocationFn pol = random_k_policy(20, int(k), power);
    for (int t = 0; t < 500; ++t) {
      const Vec p = pol(Vec::Ones(20), rng);
      CHECK(p.sum() == doctest::Approx(total));
      CHECK((p.array() > 0.0).count() == int(k));
    }
  }
  const AllocationFn all = random_k_policy(5, 5, 2.0);
  CHECK(all(Vec::Ones(5), rng) == Vec::Constant(5, 2.0));
  CHECK_THROWS_AS(random_k_policy(5, 6, 1.0), ContractViolation);
}

TEST_CASE("WMMSE single user transmits at the cap") {
  const Mat g = Mat::Constant(1, 1, 0.8);
  const WmmseResult r = wmmse_solve(g, Vec::Ones(1), Vec::Ones(1), 3.0);
  CHECK(r.power(0) == doctest::Approx(3.0));
}

TEST_CASE("WMMSE without cross gains transmits at the cap") {
  const Mat g = (Mat(3, 3) << 1.0, 0, 0, 0, 0.4, 0, 0, 0, 2.0).finished();
  const WmmseResult r = wmmse_solve(g, Vec::Ones(3), Vec::Ones(3), 2.0);
  CHECK(r.power.isApprox(Vec::Constant(3, 2.0), 1e-9));
}

TEST_CASE("WMMSE trace never decreases") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Mat g = standard_normal(16, rng).cwiseAbs().reshaped(4, 4);
    g.diagonal().array() += 0.1;
    const WmmseResult r = wmmse_solve(g, Vec::Ones(4), Vec::Constant(4, 1.0), 10.0);
    CHECK(r.monotone);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-12);
    CHECK((r.power.array() >= 0.0).all());
    CHECK((r.power.array() <= 10.0 + 1e-12).all());
  }
}

TEST_CASE("WMMSE reaches the grid optimum on two weakly coupled users") {
  const Mat g = (Mat(2, 2) << 1.2, 0.05, 0.08, 0.9).finished();
  const Vec v = (Vec(2) << 1.0, 0.7).finished();
  const Vec w = (Vec(2) << 1.0, 1.3).finished();
  const WmmseResult r = wmmse_solve(g, v, w, 5.0, 5000, 1e-13);
  const double best = grid_best_2user(g, v, w, 5.0, 200);
  CHECK(weighted_sum_rate(g, r.power, v, w) >= best - 1e-3);
}

TEST_CASE("single-start WMMSE can stall at the full-power corner") {
  // Both users gain from more power at (10, 10), so it is a stationary
  // point; the better corner is user 1 alone.
  const Mat g = (Mat(2, 2) << 1.50933, 0.193529, 0.185711, 0.364883).finished();
  const Vec one = Vec::Ones(2);
  const WmmseResult single = wmmse_solve(g, one, one, 10.0, 5000, 1e-13);
  CHECK(single.power.isApprox(Vec::Constant(2, 10.0)));
  const WmmseResult multi = wmmse_multistart(g, one, one, 10.0, 5000, 1e-13);
  CHECK(weighted_sum_rate(g, multi.power, one, one) >= grid_best_2user(g, one, one, 10.0, 200) - 1e-3);
  CHECK(multi.power(1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("multistart WMMSE reaches the grid optimum on random two-user instances") {
  Rng rng(8);
  std::exponential_distribution<double> gain(2.0);
  const Vec one = Vec::Ones(2);
  for (int t = 0; t < 30; ++t) {
    Mat g(2, 2);
    for (Eigen::Index i = 0; i < 4; ++i) g.data()[i] = gain(rng);
    const WmmseResult r = wmmse_multistart(g, one, one, 10.0, 5000, 1e-13);
    CHECK(r.monotone);
    CHECK(weighted_sum_rate(g, r.power, one, one) >= grid_best_2user(g, one, one, 10.0, 200) - 1e-3);
  }
}

TEST_CASE("WMMSE start point validation") {
  const Mat g = Mat::Identity(2, 2);
  CHECK_THROWS_AS(wmmse_solve(g, Vec::Ones(2), Vec::Ones(2), 1.0, 10, 1e-9,
                              std::numeric_limits<double>::infinity(), Vec::Constant(2, 2.0)),
                  ContractViolation);
  const WmmseResult r = wmmse_solve(g, Vec::Ones(2), Vec::Ones(2), 1.0, 10, 1e-9,
                                    std::numeric_limits<double>::infinity(), (Vec(2) << 1.0, 0.0).finished());
  CHECK(r.power(1) == 0.0);
}

TEST_CASE("WMMSE stationary point is locally optimal") {
  const Mat g = (Mat(2, 2) << 1.0, 0.6, 0.5, 1.1).finished();
  const Vec v = Vec::Ones(2), w = Vec::Ones(2);
  const WmmseResult r = wmmse_solve(g, v, w, 4.0, 5000, 1e-13);
  const double at = weighted_sum_rate(g, r.power, v, w);
  for (double da : {-0.02, 0.0, 0.02})
    for (double db : {-0.02, 0.0, 0.02}) {
      const Vec p = (r.power + (Vec(2) << da, db).finished()).cwiseMax(0.0).cwiseMin(4.0);
      CHECK(weighted_sum_rate(g, p, v, w) <= at + 1e-6);
    }
}

TEST_CASE("WMMSE respects a sum-power budget") {
  const Mat g = Mat::Identity(3, 3);
  const WmmseResult r = wmmse_solve(g, Vec::Ones(3), Vec::Ones(3), 10.0, 500, 1e-9, 6.0);
  CHECK(r.power.sum() <= 6.0 + 1e-9);
}

TEST_CASE("exact dual SGD meets the budget and matches quadrature") {
  AwgnConfig cfg = make_awgn_config(20, 20.0, 1234);
  DualSgdConfig sgd;
  const AwgnDualResult r = exact_awgn_dual_sgd(cfg, sgd, 11);
  CHECK(r.lambda.isApprox(cfg.weights));
  CHECK(std::abs(r.expected_power - cfg.p_max) <= 0.01 * cfg.p_max);

  double rate_sum = 0.0, power = 0.0;
  for (int i = 0; i < cfg.m; ++i) {
    const double w = cfg.weights(i), v = cfg.noises(i), cap = cfg.support.upper;
    const auto p_of = [&](double h) { return std::clamp(w / r.mu - v / h, 0.0, cap); };
    rate_sum += w * oracles::exp_expectation([&](double h) { return std::log1p(h * p_of(h) / v); },
                                             cfg.channel_rate);
    power += oracles::exp_expectation(p_of, cfg.channel_rate);
  }
  CHECK(std::abs(r.objective - rate_sum) <= 0.01 * rate_sum);
  CHECK(std::abs(power - cfg.p_max) <= 0.01 * cfg.p_max);
}
