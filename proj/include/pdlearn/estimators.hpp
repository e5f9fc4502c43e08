#pragma once

#include <concepts>
#include <functional>

#include "pdlearn/common.hpp"
#include "pdlearn/policy.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

/// Perturbation steps for the finite-difference estimators:
/// alpha1 for g0, alpha2 for the policy parameters, alpha3 for g.
struct FdConfig {
  double alpha1 = 1e-2;
  double alpha2 = 1e-2;
  double alpha3 = 1e-2;
  int batch = 32;

  void validate() const;
};

using ScalarObserver = std::function<double(const Vec& x)>;
using VectorObserver = std::function<Vec(const Vec& x)>;
/// Deterministic parameterized allocation (theta, h) -> p.
using ParameterizedAllocation = std::function<Vec(const Vec& theta, const Vec& h)>;

/// Random-direction forward difference for the gradient of g0:
/// mean over the batch of [g0(x0 + a1 z) - g0(x0)] / a1 * z, z ~ N(0, I).
Vec fd_grad_g0(const ScalarObserver& g0, const Vec& x0, const FdConfig& cfg, Rng& rng);

/// Jacobian estimate of g, stored u x r so that multiplying by mu (size r)
/// yields a u-vector. Returns an empty u x 0 matrix when r == 0.
Mat fd_jacobian_g(const VectorObserver& g, const Vec& x0, int r, const FdConfig& cfg, Rng& rng);

/// Jacobian estimate of E_h f(phi(h, theta), h), stored q x u. Each batch
/// element draws a fresh channel and a fresh direction; both evaluations of
/// a pair reuse the same channel.
Mat fd_policy_jacobian(const PerformanceFn& f, const ParameterizedAllocation& phi,
                       const Vec& theta, const FdConfig& cfg, const ChannelSampler& sampler,
                       Rng& rng);

/// Anything that can draw an allocation and differentiate its log-likelihood.
template <typename P>
concept PolicyLaw = requires(const P& policy, const Vec& theta, const Vec& h, const Vec& p,
                             Rng& rng) {
  { policy.sample(theta, h, rng) } -> std::convertible_to<Vec>;
  { policy.grad_log_prob(theta, h, p) } -> std::convertible_to<Vec>;
};

/// Score-function estimate of grad_theta lambda^T E f:
/// mean over the batch of (lambda^T f(p, h)) grad_theta log pi_{h,theta}(p).
/// Generic per-sample route.
template <PolicyLaw P>
Vec policy_gradient(const PerformanceFn& f, const P& policy, const Vec& theta, const Vec& lambda,
                    int batch, const ChannelSampler& sampler, Rng& rng) {
  require(batch >= 1, "policy_gradient: batch must be >= 1");
  require((lambda.array() >= 0.0).all(), "policy_gradient: lambda must be nonnegative");
  Vec grad = Vec::Zero(theta.size());
  if (lambda.isZero(0.0)) return grad;
  for (int b = 0; b < batch; ++b) {
    const Vec h = sampler.draw(rng);
    const Vec p = policy.sample(theta, h, rng);
    const double reward = lambda.dot(f(p, h));
    grad += reward * policy.grad_log_prob(theta, h, p);
  }
  return grad / batch;
}

/// Batched route for network policies: one forward and one backward pass
/// over the whole batch. Channels are drawn first, then actions.
Vec policy_gradient(const PerformanceFn& f, const StochasticPolicy& policy, const Vec& theta,
                    const Vec& lambda, int batch, const ChannelSampler& sampler, Rng& rng);

}  // namespace pdlearn
