#pragma once

#include <cmath>
#include <numbers>

#include "pdlearn/common.hpp"
#include "pdlearn/mlp.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

// ---------------------------------------------------------------------------
// Scalar kernels for the standard normal and the normal truncated to [a, b].
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar normal_pdf(Scalar t) {
  return std::exp(Scalar(-0.5) * t * t) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar normal_cdf(Scalar t) {
  return Scalar(0.5) * std::erfc(-t / std::numbers::sqrt2_v<Scalar>);
}

template <typename Scalar>
Scalar normal_sf(Scalar t) {
  return Scalar(0.5) * std::erfc(t / std::numbers::sqrt2_v<Scalar>);
}

/// Phi(beta) - Phi(alpha), evaluated on whichever tail keeps precision.
template <typename Scalar>
Scalar normal_mass(Scalar alpha, Scalar beta) {
  if (alpha > Scalar(0)) return normal_sf(alpha) - normal_sf(beta);
  if (beta < Scalar(0)) return normal_cdf(beta) - normal_cdf(alpha);
  return Scalar(1) - normal_cdf(alpha) - normal_sf(beta);
}

/// Rational approximation of the standard normal quantile (relative error
/// about 1e-9); used as the starting point of the polished inversion.
double normal_quantile_approx(double prob);

/// Exact inverse of the normal law truncated to [alpha, beta] (standardized
/// coordinates): returns zeta in [alpha, beta] with
/// (Phi(zeta) - Phi(alpha)) / (Phi(beta) - Phi(alpha)) = u.
/// Safeguarded Newton iteration on a shrinking bracket, converged to 1e-12.
double truncated_normal_quantile(double u, double alpha, double beta);

/// log density of N(mu, sigma^2) truncated to [a, b], evaluated at p.
template <typename Scalar>
Scalar truncnorm_log_pdf(Scalar p, Scalar mu, Scalar sigma, Scalar a, Scalar b) {
  const Scalar zeta = (p - mu) / sigma;
  const Scalar mass = normal_mass((a - mu) / sigma, (b - mu) / sigma);
  return -std::log(sigma) - Scalar(0.5) * zeta * zeta -
         Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) - std::log(mass);
}

/// Partial derivatives of truncnorm_log_pdf with respect to mu and sigma,
/// including the normalizer terms.
template <typename Scalar>
std::pair<Scalar, Scalar> truncnorm_score(Scalar p, Scalar mu, Scalar sigma, Scalar a, Scalar b) {
  const Scalar zeta = (p - mu) / sigma;
  const Scalar alpha = (a - mu) / sigma;
  const Scalar beta = (b - mu) / sigma;
  const Scalar mass = normal_mass(alpha, beta);
  const Scalar phi_a = normal_pdf(alpha);
  const Scalar phi_b = normal_pdf(beta);
  // beta*phi(beta) -> 0 when beta is infinite; avoid inf*0.
  const Scalar bphi_b = std::isfinite(beta) ? beta * phi_b : Scalar(0);
  const Scalar aphi_a = std::isfinite(alpha) ? alpha * phi_a : Scalar(0);
  const Scalar d_mu = zeta / sigma + (phi_b - phi_a) / (sigma * mass);
  const Scalar d_sigma = (zeta * zeta - Scalar(1)) / sigma + (bphi_b - aphi_a) / (sigma * mass);
  return {d_mu, d_sigma};
}

/// Mean and variance of the truncated normal.
template <typename Scalar>
std::pair<Scalar, Scalar> truncnorm_moments(Scalar mu, Scalar sigma, Scalar a, Scalar b) {
  const Scalar alpha = (a - mu) / sigma;
  const Scalar beta = (b - mu) / sigma;
  const Scalar mass = normal_mass(alpha, beta);
  const Scalar phi_a = normal_pdf(alpha);
  const Scalar phi_b = normal_pdf(beta);
  const Scalar r = (phi_a - phi_b) / mass;
  const Scalar mean = mu + sigma * r;
  const Scalar var = sigma * sigma * (Scalar(1) + (alpha * phi_a - beta * phi_b) / mass - r * r);
  return {mean, var};
}

// ---------------------------------------------------------------------------
// Per-user truncated Gaussian law on a common support.
// ---------------------------------------------------------------------------

struct TruncGaussParams {
  Vec mu;
  Vec sigma;
  Support support;

  Eigen::Index size() const { return mu.size(); }
  void validate() const;
  /// Reads the interleaved (mu_1, sigma_1, mu_2, sigma_2, ...) head output.
  static TruncGaussParams from_head(const Vec& head_output, const Support& support);
};

struct TruncGaussScore {
  Vec d_mu;
  Vec d_sigma;

  /// Interleaved (d_mu_1, d_sigma_1, ...) layout matching the head output.
  Vec interleaved() const;
};

/// Inverse-CDF draw, one component per user; always inside the support.
Vec sample_trunc_gauss(const TruncGaussParams& params, Rng& rng);
/// Joint log density (sum over users). Throws ContractViolation if p leaves the support.
double log_pdf_trunc_gauss(const TruncGaussParams& params, const Vec& p);
TruncGaussScore score_trunc_gauss(const TruncGaussParams& params, const Vec& p);

// ---------------------------------------------------------------------------
// Per-user Bernoulli law.
// ---------------------------------------------------------------------------

struct BernoulliParams {
  Vec prob;

  Eigen::Index size() const { return prob.size(); }
  void validate() const;
};

Vec sample_bernoulli(const BernoulliParams& params, Rng& rng);
/// Throws ContractViolation unless every component of alpha is 0 or 1.
double log_pmf_bernoulli(const BernoulliParams& params, const Vec& alpha);
/// d log pmf / d prob_i = alpha_i / prob_i - (1 - alpha_i) / (1 - prob_i).
Vec score_bernoulli(const BernoulliParams& params, const Vec& alpha);

}  // namespace pdlearn
