#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/problems.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

/// Pointwise maximizer of lambda log(1 + h p / v) - mu p over [0, cap]:
/// clamp(lambda / mu - v / h, 0, cap).
double waterfill(double lambda, double mu, double h, double v, double cap);

struct DualSgdConfig {
  int iters = 20000;
  int batch = 32;
  double step0 = 0.05;  // step k is step0 / sqrt(k)
  double mu0 = 1.0;
  double tail_fraction = 0.1;
  int eval_batch = 200000;

  void validate() const;
};

/// Unparameterized AWGN solution by dual stochastic subgradient descent on
/// the power price. The rate multipliers equal the weights at any dual
/// optimum (the rate coordinates of X do not bind), so only the price moves.
struct AwgnDualResult {
  Vec lambda;  // rate multipliers
  double mu = 0.0;  // power price, averaged over the tail
  double objective = 0.0;
  double objective_se = 0.0;
  double expected_power = 0.0;
  std::vector<double> mu_trace;
  AllocationFn policy;
};

AwgnDualResult exact_awgn_dual_sgd(const AwgnConfig& cfg, const DualSgdConfig& sgd,
                                   std::uint64_t seed);

/// Waterfilling rule for given multipliers.
AllocationFn waterfilling_policy(const AwgnConfig& cfg, const Vec& lambda, double mu);

/// p_i = p_max / m for every user.
AllocationFn equal_power_policy(int m, double p_max);

/// A uniformly random k-subset transmits at `power`, the rest stay silent.
AllocationFn random_k_policy(int m, int k, double power);

struct WmmseResult {
  Vec power;                  // per-user transmit powers
  std::vector<double> trace;  // weighted sum-rate after each iteration, trace[0] at the start
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
};

/// Weighted sum-rate sum_i w_i log(1 + G_ii p_i / (v_i + sum_{j != i} G_ij p_j)).
double weighted_sum_rate(const Mat& gains, const Vec& power, const Vec& noises, const Vec& weights);

/// Scalar-channel WMMSE with amplitudes v = sqrt(p) and power gains G(i, j)
/// from transmitter j to receiver i. Per-user cap p_cap and an optional
/// instantaneous sum-power budget. Starts from `start` (full power when
/// empty), stops when the weighted sum-rate improves by less than tol or
/// after max_iter rounds. Users that start silent stay silent.
WmmseResult wmmse_solve(const Mat& gains, const Vec& noises, const Vec& weights, double p_cap,
                        int max_iter = 500, double tol = 1e-9,
                        double sum_power = std::numeric_limits<double>::infinity(),
                        const Vec& start = Vec());

/// Best of m + 1 WMMSE runs: full power, then each user alone at the cap.
/// WMMSE only reaches a stationary point, and with per-user caps the
/// full-power corner is often one; the single-user starts cover the other
/// corners. `monotone` holds if every run was monotone.
WmmseResult wmmse_multistart(const Mat& gains, const Vec& noises, const Vec& weights, double p_cap,
                             int max_iter = 500, double tol = 1e-9,
                             double sum_power = std::numeric_limits<double>::infinity());

/// Per-realization multistart WMMSE as an allocation rule for an interference problem.
/// MAC: G(i, j) = h_j, cap = support upper end, sum power <= p_max.
/// Pairs: G from the channel matrix, cap = p0; returns alpha = p / p0 in [0, 1].
AllocationFn wmmse_policy(const InterferenceConfig& cfg, int max_iter = 500, double tol = 1e-9);

/// Binary-pairs problem with P relaxed to [0, 1]^m, used to score WMMSE.
ProblemSpec relaxed_pairs_problem(const InterferenceConfig& cfg);

struct PolicyEvaluation {
  double objective = 0.0;     // g0(E f)
  double objective_se = 0.0;  // from per-draw g0(f); exact for affine g0
  MonteCarloEstimate ef;
  double power_residual = 0.0;  // budget row of E f (0 without a budget)
  double violation_norm = 0.0;  // max(0, -power_residual)
  double min_draw_power = 0.0;  // range of sum(p) over the draws
  double max_draw_power = 0.0;
  int samples = 0;
};

/// Monte Carlo evaluation of an allocation rule with streams derived from seed.
PolicyEvaluation evaluate_policy(const ProblemSpec& problem, const AllocationFn& policy, int batch,
                                 std::uint64_t seed);

}  // namespace pdlearn
