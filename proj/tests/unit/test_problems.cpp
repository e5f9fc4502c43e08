#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pdlearn/problems.hpp"

using namespace pdlearn;

namespace {

InterferenceConfig pairs_config(int m) {
  InterferenceConfig c = make_interference_config(m, 20.0, InterferenceMode::binary_pairs, 1);
  c.weights = Vec::Ones(m);
  c.noises = Vec::Ones(m);
  return c;
}

}  // namespace

TEST_CASE("zero power gives zero capacity") {
  const ProblemBundle a = build_awgn(make_awgn_config(4, 20.0, 1));
  const Vec h = Vec::Constant(4, 0.7);
  CHECK(a.problem.f(Vec::Zero(4), h).head(4).isZero(0.0));
  CHECK(a.problem.f(Vec::Zero(4), h)(4) == 20.0);
  const ProblemBundle mac =
      build_interference(make_interference_config(3, 20.0, InterferenceMode::continuous_mac, 1));
  CHECK(mac.problem.f(Vec::Zero(3), Vec::Ones(3)).head(3).isZero(0.0));
  const ProblemBundle bin = build_interference(pairs_config(3));
  CHECK(bin.problem.f(Vec::Zero(3), Vec::Ones(9)).head(3).isZero(0.0));
}

TEST_CASE("unit channel, power and noise give log 2") {
  const Vec r = awgn_rates(Vec::Ones(3), Vec::Ones(3), Vec::Ones(3));
  for (int i = 0; i < 3; ++i) CHECK(r(i) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("AWGN problem layout") {
  const AwgnConfig cfg = make_awgn_config(20, 20.0, 1234);
  const ProblemBundle b = build_awgn(cfg);
  CHECK(b.problem.u_metrics == 21);
  CHECK(b.problem.budget_row == 20);
  CHECK(b.problem.x_box.upper(20) == 0.0);
  CHECK(b.policy.layout() == PolicyLayout::per_user);
  CHECK(b.policy.architecture().layer_sizes == std::vector<int>{1, 8, 4, 2});
  CHECK((cfg.weights.array() >= 0.5).all());
  CHECK((cfg.weights.array() <= 1.5).all());
  CHECK((cfg.noises.array() >= 0.5).all());
  CHECK((cfg.noises.array() <= 1.5).all());
  const Vec x = Vec::LinSpaced(21, 0.0, 1.0);
  CHECK(b.problem.g0(x) == doctest::Approx(cfg.weights.dot(x.head(20))));
}

TEST_CASE("single active pair has no interference") {
  InterferenceConfig c = pairs_config(1);
  c.noises = Vec::Constant(1, 0.8);
  const ProblemBundle b = build_interference(c);
  const Vec h = Vec::Constant(1, 0.3);
  CHECK(b.problem.f(Vec::Ones(1), h)(0) == doctest::Approx(std::log1p(0.3 * c.p0 / 0.8)));
}

TEST_CASE("two pairs, every on/off pattern") {
  InterferenceConfig c = pairs_config(2);
  c.noises = (Vec(2) << 0.5, 1.5).finished();
  const ProblemBundle b = build_interference(c);
  // Column-major gains: G(i, j) is transmitter j to receiver i.
  const double g11 = 0.9, g21 = 0.2, g12 = 0.4, g22 = 1.3;
  const Vec h = (Vec(4) << g11, g21, g12, g22).finished();
  const double p0 = c.p0;
  for (int a1 = 0; a1 <= 1; ++a1)
    for (int a2 = 0; a2 <= 1; ++a2) {
      const Vec f = b.problem.f((Vec(2) << a1, a2).finished(), h);
      const double r1 = std::log(1.0 + g11 * p0 * a1 / (0.5 + p0 * g12 * a2));
      const double r2 = std::log(1.0 + g22 * p0 * a2 / (1.5 + p0 * g21 * a1));
      CHECK(f(0) == doctest::Approx(r1).epsilon(1e-14));
      CHECK(f(1) == doctest::Approx(r2).epsilon(1e-14));
      CHECK(f(2) == doctest::Approx(20.0 - a1 - a2));
    }
}

TEST_CASE("binary problem rejects fractional allocations") {
  const ProblemBundle b = build_interference(pairs_config(2));
  CHECK_THROWS_AS(b.problem.f((Vec(2) << 0.5, 1.0).finished(), Vec::Ones(4)), ContractViolation);
  CHECK(b.policy.head() == OutputHead::bernoulli);
}

TEST_CASE("MAC rates match the shared-receiver formula") {
  const Vec p = (Vec(3) << 1.0, 2.0, 0.5).finished();
  const Vec h = (Vec(3) << 0.3, 1.1, 2.0).finished();
  const Vec v = (Vec(3) << 1.0, 0.7, 1.2).finished();
  const Vec r = mac_rates(p, h, v);
  for (int i = 0; i < 3; ++i) {
    double interference = 0.0;
    for (int j = 0; j < 3; ++j)
      if (j != i) interference += h(j) * p(j);
    CHECK(r(i) == doctest::Approx(std::log(1.0 + h(i) * p(i) / (v(i) + interference))));
  }
  const ProblemBundle b =
      build_interference(make_interference_config(20, 20.0, InterferenceMode::continuous_mac, 1));
  CHECK(b.policy.architecture().layer_sizes == std::vector<int>{20, 32, 16, 40});
  CHECK(b.policy.layout() == PolicyLayout::joint);
}

TEST_CASE("channel draws have the exponential mean") {
  Rng rng(3);
  const Mat H = sample_channels(ChannelSampler::exponential(1, 2.0), 1000000, rng);
  std::vector<double> xs(H.data(), H.data() + H.size());
  const auto ms = oracles::mean_se(xs);
  CHECK(std::abs(ms.mean - 0.5) <= 4.0 * ms.se);
  CHECK(H.minCoeff() > 0.0);
}

TEST_CASE("configuration errors") {
  AwgnConfig a = make_awgn_config(3, 20.0, 1);
  a.weights(1) = -1.0;
  CHECK_THROWS_AS(build_awgn(a), ContractViolation);
  InterferenceConfig c = pairs_config(2);
  c.p0 = 0.0;
  CHECK_THROWS_AS(build_interference(c), ContractViolation);
  CHECK_THROWS_AS(gains_matrix(Vec::Ones(3), 2), ContractViolation);
}
