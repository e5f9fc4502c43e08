#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "oracles.hpp"
#include "pdlearn/policy.hpp"
#include "pdlearn/policy_dist.hpp"

using namespace pdlearn;

namespace {

TruncGaussParams single(double mu, double sigma, double a = 0.0, double b = 10.0) {
  return {Vec::Constant(1, mu), Vec::Constant(1, sigma), {a, b}};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("samples stay inside the support") {
  Rng rng(1);
  const TruncGaussParams p{(Vec(3) << -4.0, 5.0, 14.0).finished(),
                           (Vec(3) << 0.3, 3.0, 0.01).finished(),
                           {0.0, 10.0}};
  for (int i = 0; i < 20000; ++i) {
    const Vec s = sample_trunc_gauss(p, rng);
    CHECK((s.array() >= 0.0).all());
    CHECK((s.array() <= 10.0).all());
  }
}

TEST_CASE("vanishing spread concentrates the samples") {
  Rng rng(2);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_trunc_gauss(single(5.0, kSigmaFloor), rng)(0);
  CHECK(std::abs(sum / n - 5.0) <= 3.0 * kSigmaFloor / std::sqrt(double(n)));
}

TEST_CASE("sample moments match quadrature moments") {
  Rng rng(3);
  const int n = 1000000;
  std::vector<double> xs(n), sq(n);
  const auto q = oracles::truncnorm_moments_quadrature(5.0, 2.0, 0.0, 10.0);
  for (int i = 0; i < n; ++i) {
    xs[i] = sample_trunc_gauss(single(5.0, 2.0), rng)(0);
    sq[i] = (xs[i] - q.mean) * (xs[i] - q.mean);
  }
  const auto m = oracles::mean_se(xs);
  const auto v = oracles::mean_se(sq);
  CHECK(std::abs(m.mean - q.mean) <= 4.0 * m.se);
  CHECK(std::abs(v.mean - q.var) <= 4.0 * v.se);
  // Closed-form moments agree with the quadrature too.
  const auto [cm, cv] = truncnorm_moments(5.0, 2.0, 0.0, 10.0);
  CHECK(cm == doctest::Approx(q.mean).epsilon(1e-9));
  CHECK(cv == doctest::Approx(q.var).epsilon(1e-9));
}

TEST_CASE("skewed truncation moments") {
  const auto q = oracles::truncnorm_moments_quadrature(1.0, 3.0, 0.0, 10.0);
  const auto [cm, cv] = truncnorm_moments(1.0, 3.0, 0.0, 10.0);
  CHECK(cm == doctest::Approx(q.mean).epsilon(1e-9));
  CHECK(cv == doctest::Approx(q.var).epsilon(1e-9));
}

TEST_CASE("truncated density integrates to one") {
  for (const auto& [mu, sigma] : std::vector<std::pair<double, double>>{{5, 2}, {1, 0.7}, {9, 4}}) {
    const double z = oracles::simpson(
        [&](double x) { return std::exp(log_pdf_trunc_gauss(single(mu, sigma), Vec::Constant(1, x))); },
        0.0, 10.0, 2000);
    CHECK(std::abs(z - 1.0) <= 1e-6);
  }
}

TEST_CASE("log density is symmetric about the center of the support") {
  for (double d : {0.1, 1.3, 4.9})
    CHECK(log_pdf_trunc_gauss(single(5.0, 1.7), Vec::Constant(1, 5.0 + d)) ==
          doctest::Approx(log_pdf_trunc_gauss(single(5.0, 1.7), Vec::Constant(1, 5.0 - d))));
}

TEST_CASE("wide truncation recovers the normal density") {
  const double mu = 3.0, sigma = 0.4;
  const auto p = single(mu, sigma, mu - 50 * sigma, mu + 50 * sigma);
  for (double x : {2.0, 3.0, 3.7})
    CHECK(std::abs(log_pdf_trunc_gauss(p, Vec::Constant(1, x)) -
                   oracles::normal_log_pdf(x, mu, sigma)) <= 1e-9);
}

TEST_CASE("log density rejects points outside the support") {
  CHECK_THROWS_AS(log_pdf_trunc_gauss(single(5, 1), Vec::Constant(1, 10.5)), ContractViolation);
  CHECK_THROWS_AS(score_trunc_gauss(single(5, 1), Vec::Constant(1, -0.1)), ContractViolation);
  CHECK_THROWS_AS(single(5, -1).validate(), ContractViolation);
}

TEST_CASE("score vanishes at the center of a symmetric support") {
  const TruncGaussScore s = score_trunc_gauss(single(5.0, 2.0), Vec::Constant(1, 5.0));
  CHECK(std::abs(s.d_mu(0)) < 1e-14);
}

TEST_CASE("truncated Gaussian score matches central differences") {
  Rng rng(21);
  std::uniform_real_distribution<double> mu_d(-2.0, 12.0), sig_d(0.05, 4.0), p_d(0.0, 10.0);
  int cases = 0;
  for (int t = 0; t < 200; ++t) {
    const double mu = mu_d(rng), sigma = sig_d(rng), x = p_d(rng);
    const Vec p = Vec::Constant(1, x);
    const TruncGaussScore s = score_trunc_gauss(single(mu, sigma), p);
    const double hm = 1e-6 * std::max(1.0, std::abs(mu)), hs = 1e-6 * sigma;
    const double fd_mu = (log_pdf_trunc_gauss(single(mu + hm, sigma), p) -
                          log_pdf_trunc_gauss(single(mu - hm, sigma), p)) / (2 * hm);
    const double fd_sigma = (log_pdf_trunc_gauss(single(mu, sigma + hs), p) -
                             log_pdf_trunc_gauss(single(mu, sigma - hs), p)) / (2 * hs);
    CHECK(rel_err(s.d_mu(0), fd_mu) <= 1e-6);
    CHECK(rel_err(s.d_sigma(0), fd_sigma) <= 1e-6);
    ++cases;
  }
  CHECK(cases >= 100);
}

TEST_CASE("Bernoulli law") {
  const BernoulliParams half{Vec::Constant(3, 0.5)};
  CHECK(log_pmf_bernoulli(half, Vec::Ones(3)) == doctest::Approx(-3.0 * std::log(2.0)));
  CHECK(score_bernoulli(half, Vec::Ones(3))(0) == doctest::Approx(2.0));
  CHECK(score_bernoulli(half, Vec::Zero(3))(0) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(log_pmf_bernoulli(half, Vec::Constant(3, 0.5)), ContractViolation);
  Rng rng(4);
  const BernoulliParams p{(Vec(2) << 0.2, 0.9).finished()};
  Vec sum = Vec::Zero(2);
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += sample_bernoulli(p, rng);
  CHECK(sum(0) / n == doctest::Approx(0.2).epsilon(0.02));
  CHECK(sum(1) / n == doctest::Approx(0.9).epsilon(0.02));
}

TEST_CASE("Bernoulli score matches central differences") {
  Rng rng(22);
  std::uniform_real_distribution<double> pd(0.02, 0.98);
  int cases = 0;
  for (int t = 0; t < 120; ++t) {
    const Vec prob = (Vec(3) << pd(rng), pd(rng), pd(rng)).finished();
    Vec alpha(3);
    for (int i = 0; i < 3; ++i) alpha(i) = (rng() & 1) ? 1.0 : 0.0;
    const Vec s = score_bernoulli({prob}, alpha);
    for (int i = 0; i < 3; ++i) {
      Vec up = prob, dn = prob;
      up(i) += 1e-7;
      dn(i) -= 1e-7;
      const double fd = (log_pmf_bernoulli({up}, alpha) - log_pmf_bernoulli({dn}, alpha)) / 2e-7;
      CHECK(rel_err(s(i), fd) <= 1e-6);
    }
    ++cases;
  }
  CHECK(cases >= 100);
}

TEST_CASE("policy log-likelihood gradient matches central differences") {
  Rng rng(31);
  int cases = 0;
  for (int t = 0; t < 120; ++t) {
    const bool gaussian = t % 2 == 0;
    const bool joint = t % 3 == 0;
    const int users = 1 + t % 3;
    const OutputHead head = gaussian ? OutputHead::truncated_gaussian : OutputHead::bernoulli;
    const int per = gaussian ? 2 : 1;
    const int in = joint ? users : 1;
    const int out = joint ? per * users : per;
    const StochasticPolicy pol(MlpArchitecture::feedforward(in, {5, 3}, out, head, true),
                               {0.0, 10.0}, users, joint ? PolicyLayout::joint : PolicyLayout::per_user);
    const Vec theta = 0.5 * standard_normal(pol.num_params(), rng);
    const Vec h = standard_normal(users, rng).cwiseAbs() + Vec::Constant(users, 0.05);
    const Vec p = pol.sample(theta, h, rng);
    const Vec g = pol.grad_log_prob(theta, h, p);
    Vec fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vec a = theta, b = theta;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      fd(i) = (pol.log_prob(a, h, p) - pol.log_prob(b, h, p)) / 2e-6;
    }
    const double scale = std::max({g.lpNorm<Eigen::Infinity>(), fd.lpNorm<Eigen::Infinity>(), 1e-8});
    CHECK((g - fd).lpNorm<Eigen::Infinity>() / scale <= 1e-5);
    ++cases;
  }
  CHECK(cases >= 100);
}

TEST_CASE("inverse-CDF draw hits the requested quantile") {
  for (double u : {1e-9, 0.1, 0.5, 0.9, 1 - 1e-9}) {
    const double alpha = -1.3, beta = 2.2;
    const double z = truncated_normal_quantile(u, alpha, beta);
    const double num = 0.5 * std::erfc(-z / std::sqrt(2.0)) - 0.5 * std::erfc(-alpha / std::sqrt(2.0));
    const double den = 0.5 * std::erfc(-beta / std::sqrt(2.0)) - 0.5 * std::erfc(-alpha / std::sqrt(2.0));
    CHECK(num / den == doctest::Approx(u).epsilon(1e-9));
  }
  // Far tail on one side.
  const double z = truncated_normal_quantile(0.5, 8.0, 12.0);
  CHECK(z > 8.0);
  CHECK(z < 8.2);
}

TEST_CASE("policy checkpoint round trip") {
  const StochasticPolicy pol(MlpArchitecture::feedforward(1, {8, 4}, 2, OutputHead::truncated_gaussian, true),
                             {0.0, 10.0}, 3, PolicyLayout::per_user);
  Rng rng(5);
  const Vec theta = pol.initial_theta(rng);
  const auto path = std::filesystem::temp_directory_path() / "pdlearn_policy_roundtrip.txt";
  pol.save(path.string(), theta, {"{\"k\":1}"});
  const auto [back, t2] = StochasticPolicy::load(path.string());
  CHECK(t2 == theta);
  CHECK(back.num_users() == 3);
  CHECK(back.layout() == PolicyLayout::per_user);
  std::filesystem::remove(path);
}
