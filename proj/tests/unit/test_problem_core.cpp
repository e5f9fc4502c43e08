#include "doctest.h"

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/problems.hpp"

using namespace pdlearn;

namespace {

// u-dimensional toy: f(p, h) = p * h (elementwise), g0 = sum x, box [0, 10]^u.
ProblemSpec linear_problem(int u, int r = 0) {
  ProblemSpec p;
  p.n_channels = p.m_resources = p.u_metrics = u;
  p.r_utilities = r;
  p.f = [](const Vec& a, const Vec& h) { return Vec(a.cwiseProduct(h)); };
  p.g0 = [](const Vec& x) { return x.sum(); };
  if (r > 0) p.g = [r](const Vec& x) { return Vec(Vec::Constant(r, 1.0) - x.head(r).cwiseAbs2()); };
  p.x_box = {Vec::Zero(u), Vec::Constant(u, 10.0)};
  p.p_box = {Vec::Zero(u), Vec::Constant(u, 10.0)};
  p.sampler = ChannelSampler::exponential(u, 2.0);
  return p;
}

// Lagrangian summed term by term with plain loops.
double lagrangian_by_hand(const Vec& x, const Vec& lambda, const Vec& mu, const Vec& ef) {
  double g0 = 0.0;
  for (int i = 0; i < x.size(); ++i) g0 += x(i);
  double penalty = 0.0;
  for (int i = 0; i < x.size(); ++i) penalty += lambda(i) * (ef(i) - x(i));
  double util = 0.0;
  for (int j = 0; j < mu.size(); ++j) util += mu(j) * (1.0 - x(j) * x(j));
  return g0 + penalty + util;
}

}  // namespace

TEST_CASE("lagrangian collapses to g0 with zero multipliers") {
  const ProblemSpec p = linear_problem(3, 1);
  const Vec x = Vec::LinSpaced(3, 0.5, 2.5);
  const double v = evaluate_lagrangian(p, x, {Vec::Zero(3), Vec::Zero(1)}, Vec::Constant(3, 7.0));
  CHECK(v == x.sum());
}

TEST_CASE("lagrangian penalty vanishes when the constraint is tight") {
  const ProblemSpec p = linear_problem(4);
  const Vec x = Vec::LinSpaced(4, 1.0, 4.0);
  CHECK(evaluate_lagrangian(p, x, {Vec::Ones(4), Vec(0)}, x) == doctest::Approx(10.0));
}

TEST_CASE("lagrangian matches a term-by-term recomputation") {
  const ProblemSpec p = linear_problem(3, 2);
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const Vec x = standard_normal(3, rng);
    const Vec lambda = standard_normal(3, rng).cwiseAbs();
    const Vec mu = standard_normal(2, rng).cwiseAbs();
    const Vec ef = standard_normal(3, rng);
    CHECK(evaluate_lagrangian(p, x, {lambda, mu}, ef) ==
          doctest::Approx(lagrangian_by_hand(x, lambda, mu, ef)).epsilon(1e-13));
  }
}

TEST_CASE("lagrangian rejects mismatched dimensions") {
  const ProblemSpec p = linear_problem(3);
  CHECK_THROWS_AS(evaluate_lagrangian(p, Vec::Zero(2), {Vec::Zero(3), Vec(0)}, Vec::Zero(3)),
                  ContractViolation);
  CHECK_THROWS_AS(evaluate_lagrangian(p, Vec::Zero(3), {Vec::Zero(2), Vec(0)}, Vec::Zero(3)),
                  ContractViolation);
}

TEST_CASE("box projection") {
  const Vec lo = Vec::Zero(2), hi = Vec::Constant(2, 10.0);
  const Vec inside = (Vec(2) << 3.0, 9.5).finished();
  CHECK(project_box(inside, lo, hi) == inside);
  const Vec out = project_box(Vec((Vec(2) << -1.0, 11.0).finished()), lo, hi);
  CHECK(out(0) == 0.0);
  CHECK(out(1) == 10.0);
  CHECK_THROWS_AS(project_box(inside, hi, lo), ContractViolation);
  CHECK_THROWS_AS(project_box(inside, Vec::Zero(3), Vec::Ones(3)), ContractViolation);
}

TEST_CASE("box projection is the nearest point of the box") {
  // Fine-grid search for argmin ||w - v|| over [-1, 2] x [0, 3].
  Rng rng(5);
  const Vec lo = (Vec(2) << -1.0, 0.0).finished();
  const Vec hi = (Vec(2) << 2.0, 3.0).finished();
  const int n = 300;
  for (int t = 0; t < 20; ++t) {
    const Vec v = 3.0 * standard_normal(2, rng);
    Vec best = lo;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const Vec w = (Vec(2) << lo(0) + 3.0 * i / n, lo(1) + 3.0 * j / n).finished();
        const double d = (w - v).norm();
        if (d < best_d) {
          best_d = d;
          best = w;
        }
      }
    CHECK((project_box(v, lo, hi) - best).lpNorm<Eigen::Infinity>() <= 3.0 / n);
  }
}

TEST_CASE("nonnegative projection") {
  const Vec pos = (Vec(3) << 1.0, 2.0, 0.5).finished();
  CHECK(project_nonneg(pos) == pos);
  const Vec r = project_nonneg(Vec((Vec(2) << -3.0, 2.0).finished()));
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 2.0);
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Vec v = standard_normal(5, rng);
    CHECK(project_nonneg(v) == project_box(v, Vec::Zero(5), Vec::Constant(5, 1e300)));
  }
}

TEST_CASE("expected f of a constant performance function") {
  ProblemSpec p = linear_problem(2);
  p.f = [](const Vec&, const Vec&) { return Vec((Vec(2) << 1.5, -2.0).finished()); };
  const AllocationFn zero = [](const Vec&, Rng&) { return Vec(Vec::Zero(2)); };
  for (int batch : {1, 7, 1000}) {
    const Vec ef = estimate_expected_f(p, zero, batch, 3);
    CHECK(ef(0) == doctest::Approx(1.5));
    CHECK(ef(1) == doctest::Approx(-2.0));
  }
}

TEST_CASE("zero allocation gives zero capacity") {
  AwgnConfig cfg = make_awgn_config(5, 20.0, 1);
  const ProblemBundle b = build_awgn(cfg);
  const AllocationFn zero = [](const Vec&, Rng&) { return Vec(Vec::Zero(5)); };
  const Vec ef = estimate_expected_f(b.problem, zero, 100, 1);
  CHECK(ef.head(5).isZero(0.0));
}

TEST_CASE("expected capacity at unit power matches quadrature") {
  AwgnConfig cfg = make_awgn_config(1, 20.0, 1);
  cfg.weights = Vec::Ones(1);
  cfg.noises = Vec::Ones(1);
  const ProblemBundle b = build_awgn(cfg);
  const AllocationFn one = [](const Vec&, Rng&) { return Vec(Vec::Ones(1)); };
  const MonteCarloEstimate est = estimate_expected_f_with_error(b.problem, one, 100000, 42);
  const double exact = oracles::exp_expectation([](double h) { return std::log1p(h); }, 2.0);
  CHECK(std::abs(est.mean(0) - exact) <= 3.0 * est.std_error(0));
}

TEST_CASE("expected f rejects allocations outside P") {
  const ProblemSpec p = linear_problem(2);
  const AllocationFn bad = [](const Vec&, Rng&) { return Vec(Vec::Constant(2, 11.0)); };
  CHECK_THROWS_AS(estimate_expected_f(p, bad, 10, 1), ContractViolation);
  CHECK_THROWS_AS(estimate_expected_f(p, bad, 0, 1), ContractViolation);
}

TEST_CASE("problem validation") {
  ProblemSpec p = linear_problem(2);
  CHECK_NOTHROW(p.validate());
  p.x_box.lower = Vec::Zero(3);
  CHECK_THROWS_AS(p.validate(), ContractViolation);
  p = linear_problem(2, 1);
  p.g = nullptr;
  CHECK_THROWS_AS(p.validate(), ContractViolation);
}

TEST_CASE("named streams are independent and reproducible") {
  CHECK(derive_seed(7, "channel") != derive_seed(7, "init"));
  CHECK(derive_seed(7, "channel") != derive_seed(8, "channel"));
  Rng a = make_stream(7, "channel"), b = make_stream(7, "channel");
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform_open(c);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}
