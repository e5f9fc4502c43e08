#include "pdlearn/estimators.hpp"

namespace pdlearn {

void FdConfig::validate() const {
  require(alpha1 > 0.0 && alpha2 > 0.0 && alpha3 > 0.0, "fd: perturbation steps must be positive");
  require(batch >= 1, "fd: batch must be >= 1");
}

Vec fd_grad_g0(const ScalarObserver& g0, const Vec& x0, const FdConfig& cfg, Rng& rng) {
  cfg.validate();
  Vec grad = Vec::Zero(x0.size());
  for (int b = 0; b < cfg.batch; ++b) {
    const Vec z = standard_normal(x0.size(), rng);
    const double diff = (g0(x0 + cfg.alpha1 * z) - g0(x0)) / cfg.alpha1;
    grad += diff * z;
  }
  return grad / cfg.batch;
}

Mat fd_jacobian_g(const VectorObserver& g, const Vec& x0, int r, const FdConfig& cfg, Rng& rng) {
  cfg.validate();
  require(r >= 0, "fd_jacobian_g: negative constraint count");
  Mat jac = Mat::Zero(x0.size(), r);
  if (r == 0) return jac;
  for (int b = 0; b < cfg.batch; ++b) {
    const Vec z = standard_normal(x0.size(), rng);
    const Vec diff = (g(x0 + cfg.alpha3 * z) - g(x0)) / cfg.alpha3;
    require(diff.size() == r, "fd_jacobian_g: observer returned the wrong dimension");
    jac += z * diff.transpose();
  }
  return jac / cfg.batch;
}

Mat fd_policy_jacobian(const PerformanceFn& f, const ParameterizedAllocation& phi,
                       const Vec& theta, const FdConfig& cfg, const ChannelSampler& sampler,
                       Rng& rng) {
  cfg.validate();
  Mat jac;
  for (int b = 0; b < cfg.batch; ++b) {
    const Vec h = sampler.draw(rng);
    const Vec dir = standard_normal(theta.size(), rng);
    const Vec base = f(phi(theta, h), h);
    const Vec moved = f(phi(theta + cfg.alpha2 * dir, h), h);
    if (b == 0) jac = Mat::Zero(theta.size(), base.size());
    jac += dir * ((moved - base) / cfg.alpha2).transpose();
  }
  return jac / cfg.batch;
}

Vec policy_gradient(const PerformanceFn& f, const StochasticPolicy& policy, const Vec& theta,
                    const Vec& lambda, int batch, const ChannelSampler& sampler, Rng& rng) {
  require(batch >= 1, "policy_gradient: batch must be >= 1");
  require((lambda.array() >= 0.0).all(), "policy_gradient: lambda must be nonnegative");
  if (lambda.isZero(0.0)) return Vec::Zero(theta.size());
  const Mat H = sampler.draw_batch(rng, batch);
  const Mat D = policy.distribution_batch(theta, H);
  Mat upstream(D.rows(), batch);
  for (int b = 0; b < batch; ++b) {
    const Vec h = H.col(b);
    const Vec d = D.col(b);
    const Vec p = policy.sample_action(d, rng);
    const double reward = lambda.dot(f(p, h));
    upstream.col(b) = reward * policy.score(d, p);
  }
  return policy.backward_batch(theta, H, upstream) / batch;
}

}  // namespace pdlearn
