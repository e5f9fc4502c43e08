#include "pdlearn/policy_dist.hpp"

#include <algorithm>
#include <limits>

namespace pdlearn {

double normal_quantile_approx(double prob) {
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  if (prob <= 0.0) return -std::numeric_limits<double>::infinity();
  if (prob >= 1.0) return std::numeric_limits<double>::infinity();
  if (prob < low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (prob > 1.0 - low) {
    const double q = std::sqrt(-2.0 * std::log1p(-prob));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = prob - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double truncated_normal_quantile(double u, double alpha, double beta) {
  require(alpha < beta, "truncated_normal_quantile: empty interval");
  u = std::clamp(u, 0.0, 1.0);
  const double mass = normal_mass(alpha, beta);

  // Work on the lower-tail CDF unless the target sits in the upper half, in
  // which case the survival function keeps relative precision.
  const bool upper = alpha >= 0.0 || (beta > 0.0 && normal_cdf(alpha) + u * mass > 0.5);
  double target;
  if (upper)
    target = normal_sf(beta) + (1.0 - u) * mass;  // S(zeta)
  else
    target = normal_cdf(alpha) + u * mass;  // Phi(zeta)

  auto residual = [&](double z) { return upper ? normal_sf(z) - target : normal_cdf(z) - target; };
  // residual is increasing in z for the CDF form, decreasing for the survival form.
  const double sign = upper ? -1.0 : 1.0;

  double lo = alpha;
  double hi = beta;
  double z = upper ? -normal_quantile_approx(target) : normal_quantile_approx(target);
  if (!std::isfinite(z) || z <= lo || z >= hi) {
    const double flo = std::isfinite(lo) ? lo : hi - 40.0;
    const double fhi = std::isfinite(hi) ? hi : lo + 40.0;
    z = 0.5 * (flo + fhi);
  }
  for (int it = 0; it < 200; ++it) {
    const double r = residual(z);
    if (r == 0.0) break;
    if (sign * r > 0.0)
      hi = z;
    else
      lo = z;
    const double slope = sign * normal_pdf(z);
    double next = slope != 0.0 ? z - r / slope : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) {
      const double flo = std::isfinite(lo) ? lo : hi - 40.0;
      const double fhi = std::isfinite(hi) ? hi : lo + 40.0;
      next = 0.5 * (flo + fhi);
    }
    const double step = std::abs(next - z);
    z = next;
    if (step <= 1e-12 * (1.0 + std::abs(z)) || (hi - lo) <= 1e-12 * (1.0 + std::abs(z))) break;
  }
  return std::clamp(z, alpha, beta);
}

void TruncGaussParams::validate() const {
  require(mu.size() == sigma.size(), "truncated Gaussian: mu/sigma size mismatch");
  require(support.lower < support.upper, "truncated Gaussian: empty support");
  require((sigma.array() > 0.0).all() && sigma.allFinite(),
          "truncated Gaussian: sigma must be positive");
  require(mu.allFinite(), "truncated Gaussian: mu must be finite");
}

TruncGaussParams TruncGaussParams::from_head(const Vec& head_output, const Support& support) {
  require(head_output.size() % 2 == 0, "truncated Gaussian head output must have even length");
  const Eigen::Index m = head_output.size() / 2;
  TruncGaussParams params;
  params.support = support;
  params.mu.resize(m);
  params.sigma.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    params.mu(i) = head_output(2 * i);
    params.sigma(i) = head_output(2 * i + 1);
  }
  return params;
}

Vec TruncGaussScore::interleaved() const {
  Vec out(2 * d_mu.size());
  for (Eigen::Index i = 0; i < d_mu.size(); ++i) {
    out(2 * i) = d_mu(i);
    out(2 * i + 1) = d_sigma(i);
  }
  return out;
}

Vec sample_trunc_gauss(const TruncGaussParams& params, Rng& rng) {
  params.validate();
  const double a = params.support.lower;
  const double b = params.support.upper;
  Vec p(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double mu = params.mu(i);
    const double sigma = params.sigma(i);
    const double zeta = truncated_normal_quantile(uniform_open(rng), (a - mu) / sigma, (b - mu) / sigma);
    p(i) = std::clamp(mu + sigma * zeta, a, b);
  }
  return p;
}

namespace {

void require_in_support(const TruncGaussParams& params, const Vec& p) {
  require(p.size() == params.size(), "truncated Gaussian: argument dimension mismatch");
  require((p.array() >= params.support.lower).all() && (p.array() <= params.support.upper).all(),
          "truncated Gaussian: argument outside the support");
}

}  // namespace

double log_pdf_trunc_gauss(const TruncGaussParams& params, const Vec& p) {
  params.validate();
  require_in_support(params, p);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    total += truncnorm_log_pdf(p(i), params.mu(i), params.sigma(i), params.support.lower,
                               params.support.upper);
  return total;
}

TruncGaussScore score_trunc_gauss(const TruncGaussParams& params, const Vec& p) {
  params.validate();
  require_in_support(params, p);
  TruncGaussScore s{Vec(p.size()), Vec(p.size())};
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    auto [dm, ds] = truncnorm_score(p(i), params.mu(i), params.sigma(i), params.support.lower,
                                    params.support.upper);
    s.d_mu(i) = dm;
    s.d_sigma(i) = ds;
  }
  return s;
}

void BernoulliParams::validate() const {
  require(((prob.array() > 0.0) && (prob.array() < 1.0)).all(),
          "Bernoulli: probabilities must lie in (0, 1)");
}

Vec sample_bernoulli(const BernoulliParams& params, Rng& rng) {
  params.validate();
  Vec alpha(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i)
    alpha(i) = uniform_open(rng) < params.prob(i) ? 1.0 : 0.0;
  return alpha;
}

namespace {

void require_binary(const BernoulliParams& params, const Vec& alpha) {
  require(alpha.size() == params.size(), "Bernoulli: argument dimension mismatch");
  require(((alpha.array() == 0.0) || (alpha.array() == 1.0)).all(),
          "Bernoulli: argument must be binary");
}

}  // namespace

double log_pmf_bernoulli(const BernoulliParams& params, const Vec& alpha) {
  params.validate();
  require_binary(params, alpha);
  double total = 0.0;
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    total += alpha(i) == 1.0 ? std::log(params.prob(i)) : std::log1p(-params.prob(i));
  return total;
}

Vec score_bernoulli(const BernoulliParams& params, const Vec& alpha) {
  params.validate();
  require_binary(params, alpha);
  return (alpha.array() / params.prob.array() -
          (1.0 - alpha.array()) / (1.0 - params.prob.array()))
      .matrix();
}

}  // namespace pdlearn
