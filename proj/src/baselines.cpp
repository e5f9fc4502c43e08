#include "pdlearn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pdlearn {

double waterfill(double lambda, double mu, double h, double v, double cap) {
  require(lambda >= 0.0 && mu >= 0.0, "waterfill: multipliers must be nonnegative");
  require(h > 0.0 && v > 0.0 && cap >= 0.0, "waterfill: invalid channel or cap");
  if (mu == 0.0) return lambda > 0.0 ? cap : 0.0;
  return std::clamp(lambda / mu - v / h, 0.0, cap);
}

void DualSgdConfig::validate() const {
  require(iters >= 1 && batch >= 1 && eval_batch >= 2, "dual sgd: counts must be positive");
  require(step0 > 0.0 && mu0 >= 0.0, "dual sgd: invalid step or initial price");
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, "dual sgd: tail fraction in (0, 1]");
}

AllocationFn waterfilling_policy(const AwgnConfig& cfg, const Vec& lambda, double mu) {
  require(lambda.size() == cfg.m, "waterfilling_policy: lambda has wrong size");
  return [lambda, mu, v = cfg.noises, cap = cfg.support.upper](const Vec& h, Rng&) {
    Vec p(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) p(i) = waterfill(lambda(i), mu, h(i), v(i), cap);
    return p;
  };
}

AwgnDualResult exact_awgn_dual_sgd(const AwgnConfig& cfg, const DualSgdConfig& sgd,
                                   std::uint64_t seed) {
  cfg.validate();
  sgd.validate();
  const ChannelSampler sampler = ChannelSampler::exponential(cfg.m, cfg.channel_rate);
  Rng rng = make_stream(seed, "channel");
  AwgnDualResult out;
  out.lambda = cfg.weights;
  double mu = sgd.mu0;
  const long tail_start =
      sgd.iters - std::max<long>(1, static_cast<long>(std::ceil(sgd.tail_fraction * sgd.iters)));
  double tail_sum = 0.0;
  long tail_count = 0;
  out.mu_trace.reserve(static_cast<std::size_t>(sgd.iters));
  for (int k = 1; k <= sgd.iters; ++k) {
    double power = 0.0;
    for (int b = 0; b < sgd.batch; ++b) {
      const Vec h = sampler.draw(rng);
      for (int i = 0; i < cfg.m; ++i)
        power += waterfill(out.lambda(i), mu, h(i), cfg.noises(i), cfg.support.upper);
    }
    power /= sgd.batch;
    mu = std::max(0.0, mu - sgd.step0 / std::sqrt(static_cast<double>(k)) * (cfg.p_max - power));
    if (!std::isfinite(mu))
      throw NumericalFailure("exact_awgn_dual_sgd: price diverged at iteration " +
                             std::to_string(k));
    out.mu_trace.push_back(mu);
    if (k > tail_start) {
      tail_sum += mu;
      ++tail_count;
    }
  }
  out.mu = tail_sum / static_cast<double>(tail_count);
  out.policy = waterfilling_policy(cfg, out.lambda, out.mu);
  const ProblemBundle bundle = build_awgn(cfg);
  const PolicyEvaluation ev =
      evaluate_policy(bundle.problem, out.policy, sgd.eval_batch, derive_seed(seed, "evaluation"));
  out.objective = ev.objective;
  out.objective_se = ev.objective_se;
  out.expected_power = cfg.p_max - ev.power_residual;
  return out;
}

AllocationFn equal_power_policy(int m, double p_max) {
  require(m >= 1 && p_max >= 0.0, "equal_power_policy: invalid arguments");
  return [m, p_max](const Vec&, Rng&) { return Vec::Constant(m, p_max / m); };
}

AllocationFn random_k_policy(int m, int k, double power) {
  require(m >= 1 && k >= 0 && k <= m, "random_k_policy: need 0 <= k <= m");
  require(power >= 0.0, "random_k_policy: power must be nonnegative");
  return [m, k, power](const Vec&, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    Vec p = Vec::Zero(m);
    for (int s = 0; s < k; ++s) {
      std::uniform_int_distribution<int> pick(s, m - 1);
      std::swap(idx[static_cast<std::size_t>(s)], idx[static_cast<std::size_t>(pick(rng))]);
      p(idx[static_cast<std::size_t>(s)]) = power;
    }
    return p;
  };
}

double weighted_sum_rate(const Mat& gains, const Vec& power, const Vec& noises,
                         const Vec& weights) {
  return weights.dot(pair_rates(power, gains, noises, 1.0));
}

namespace {

// Amplitudes minimizing the weighted MSE for fixed receivers and weights:
// v_k = clamp(c_k / (d_k + eta), 0, sqrt(cap)) with eta >= 0 the price of
// the sum-power budget.
Vec amplitude_step(const Vec& c, const Vec& d, double amp_cap, double sum_power) {
  auto at = [&](double eta) {
    Vec v(c.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      const double den = d(k) + eta;
      v(k) = den > 0.0 ? std::clamp(c(k) / den, 0.0, amp_cap) : (c(k) > 0.0 ? amp_cap : 0.0);
    }
    return v;
  };
  Vec v = at(0.0);
  if (!std::isfinite(sum_power) || v.squaredNorm() <= sum_power) return v;
  double lo = 0.0;
  double hi = 1.0;
  while (at(hi).squaredNorm() > sum_power) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (at(mid).squaredNorm() > sum_power ? lo : hi) = mid;
  }
  return at(hi);
}

}  // namespace

WmmseResult wmmse_solve(const Mat& gains, const Vec& noises, const Vec& weights, double p_cap,
                        int max_iter, double tol, double sum_power, const Vec& start) {
  const Eigen::Index m = gains.rows();
  require(gains.cols() == m && noises.size() == m && weights.size() == m,
          "wmmse_solve: size mismatch");
  require((gains.array() >= 0.0).all() && (gains.diagonal().array() > 0.0).all(),
          "wmmse_solve: gains must be nonnegative with positive direct gains");
  require((noises.array() > 0.0).all() && (weights.array() >= 0.0).all(),
          "wmmse_solve: invalid noises or weights");
  require(p_cap > 0.0 && sum_power > 0.0 && max_iter >= 1 && tol >= 0.0,
          "wmmse_solve: invalid caps or limits");

  const Mat amp = gains.cwiseSqrt();  // amplitude gains
  const double amp_cap = std::sqrt(p_cap);
  require(start.size() == 0 || (start.size() == m && (start.array() >= 0.0).all() &&
                                 (start.array() <= p_cap).all()),
          "wmmse_solve: start must lie in [0, p_cap]^m");
  Vec v = start.size() == 0 ? Vec::Constant(m, amp_cap) : start.cwiseSqrt().eval();
  if (std::isfinite(sum_power) && v.squaredNorm() > sum_power)
    v *= std::sqrt(sum_power / v.squaredNorm());

  WmmseResult res;
  double current = weighted_sum_rate(gains, v.cwiseAbs2(), noises, weights);
  res.trace.push_back(current);
  Vec u(m), w(m), c(m), d(m);
  for (int it = 1; it <= max_iter; ++it) {
    const Vec received = gains * v.cwiseAbs2();  // row i: sum_j G_ij v_j^2
    for (Eigen::Index k = 0; k < m; ++k) {
      u(k) = amp(k, k) * v(k) / (noises(k) + received(k));
      w(k) = 1.0 / (1.0 - u(k) * amp(k, k) * v(k));
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      c(k) = weights(k) * w(k) * u(k) * amp(k, k);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) acc += weights(j) * w(j) * u(j) * u(j) * gains(j, k);
      d(k) = acc;
    }
    v = amplitude_step(c, d, amp_cap, sum_power);
    const double next = weighted_sum_rate(gains, v.cwiseAbs2(), noises, weights);
    res.trace.push_back(next);
    res.iterations = it;
    if (next < current - 1e-10 * std::max(1.0, std::abs(current))) res.monotone = false;
    const double gain = next - current;
    current = next;
    if (std::abs(gain) < tol) {
      res.converged = true;
      break;
    }
  }
  res.power = v.cwiseAbs2();
  return res;
}

WmmseResult wmmse_multistart(const Mat& gains, const Vec& noises, const Vec& weights, double p_cap,
                             int max_iter, double tol, double sum_power) {
  const Eigen::Index m = gains.rows();
  WmmseResult best = wmmse_solve(gains, noises, weights, p_cap, max_iter, tol, sum_power);
  double best_rate = weighted_sum_rate(gains, best.power, noises, weights);
  bool monotone = best.monotone;
  for (Eigen::Index k = 0; k < m && m > 1; ++k) {
    const Vec start = Vec::Unit(m, k) * std::min(p_cap, sum_power);
    WmmseResult r = wmmse_solve(gains, noises, weights, p_cap, max_iter, tol, sum_power, start);
    monotone = monotone && r.monotone;
    const double rate = weighted_sum_rate(gains, r.power, noises, weights);
    if (rate > best_rate) {
      best_rate = rate;
      best = std::move(r);
    }
  }
  best.monotone = monotone;
  return best;
}

AllocationFn wmmse_policy(const InterferenceConfig& cfg, int max_iter, double tol) {
  cfg.validate();
  if (cfg.mode == InterferenceMode::continuous_mac) {
    return [cfg, max_iter, tol](const Vec& h, Rng&) {
      const Mat gains = Vec::Ones(cfg.m) * h.transpose();  // G(i, j) = h_j
      Vec p = wmmse_multistart(gains, cfg.noises, cfg.weights, cfg.support.upper, max_iter, tol,
                               cfg.p_max)
                  .power;
      return p.cwiseMin(cfg.support.upper).cwiseMax(cfg.support.lower).eval();
    };
  }
  return [cfg, max_iter, tol](const Vec& h, Rng&) {
    const Vec p =
        wmmse_multistart(gains_matrix(h, cfg.m), cfg.noises, cfg.weights, cfg.p0, max_iter, tol).power;
    return (p / cfg.p0).cwiseMin(1.0).cwiseMax(0.0).eval();
  };
}

ProblemSpec relaxed_pairs_problem(const InterferenceConfig& cfg) {
  require(cfg.mode == InterferenceMode::binary_pairs, "relaxed_pairs_problem: needs pairs mode");
  ProblemSpec p = build_interference(cfg).problem;
  const int m = cfg.m;
  p.f = [v = cfg.noises, p_max = cfg.p_max, p0 = cfg.p0, m](const Vec& alpha, const Vec& h) {
    Vec out(m + 1);
    out.head(m) = pair_rates(alpha, gains_matrix(h, m), v, p0);
    out(m) = p_max - alpha.sum();
    return out;
  };
  p.binary_allocation = false;
  return p;
}

PolicyEvaluation evaluate_policy(const ProblemSpec& problem, const AllocationFn& policy, int batch,
                                 std::uint64_t seed) {
  require(batch >= 2, "evaluate_policy: batch must be >= 2");
  problem.validate();
  Rng channel_rng = make_stream(seed, "channel");
  Rng action_rng = make_stream(seed, "policy-sampling");
  const Eigen::Index u = problem.u_metrics;
  Vec mean = Vec::Zero(u), m2 = Vec::Zero(u);
  double obj_mean = 0.0, obj_m2 = 0.0;
  PolicyEvaluation ev;
  ev.min_draw_power = std::numeric_limits<double>::infinity();
  ev.max_draw_power = -std::numeric_limits<double>::infinity();
  for (int b = 0; b < batch; ++b) {
    const Vec h = problem.sampler.draw(channel_rng);
    const Vec p = policy(h, action_rng);
    require(problem.allocation_admissible(p), "evaluate_policy: allocation outside P");
    const Vec fv = problem.f(p, h);
    const Vec delta = fv - mean;
    mean += delta / (b + 1);
    m2 += delta.cwiseProduct(fv - mean);
    const double g = problem.g0(fv);
    const double dg = g - obj_mean;
    obj_mean += dg / (b + 1);
    obj_m2 += dg * (g - obj_mean);
    ev.min_draw_power = std::min(ev.min_draw_power, p.sum());
    ev.max_draw_power = std::max(ev.max_draw_power, p.sum());
  }
  const double n = batch;
  ev.samples = batch;
  ev.ef.samples = batch;
  ev.ef.mean = mean;
  ev.ef.std_error = (m2 / (n * (n - 1))).cwiseSqrt();
  ev.objective = problem.g0(mean);
  ev.objective_se = std::sqrt(obj_m2 / (n * (n - 1)));
  if (problem.budget_row >= 0) {
    ev.power_residual = mean(problem.budget_row);
    ev.violation_norm = std::max(0.0, -ev.power_residual);
  }
  return ev;
}

}  // namespace pdlearn
