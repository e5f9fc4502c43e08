#pragma once

#include <cstdint>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/problems.hpp"
#include "pdlearn/random.hpp"
#include "pdlearn/trainer.hpp"

namespace pdlearn {

/// Desk-scale AWGN instance whose channel law is a finite set of atoms, so
/// expectations over h are exact sums.
struct TinyConfig {
  int users = 1;    // m <= 2
  int states = 16;  // S atoms
  int levels = 32;  // G grid levels per user
  double p_max = 1.0;
  double weight = 1.0;
  double noise = 1.0;
  double channel_rate = 2.0;
  Support support{0.0, 4.0};
  double rate_cap = 2.0;
  std::vector<int> hidden = {8, 4};
  bool bias = true;

  void validate() const;
};

struct TinyInstance {
  TinyConfig cfg;
  ProblemBundle bundle;  // sampler replaced by the discrete law
  std::vector<Vec> atoms;
  Vec probabilities;
  Vec levels;
};

/// S equiprobable atoms at the Exp(rate) quantiles (s + 0.5) / S. For dim 2
/// the second coordinate walks the same quantiles with stride 7 (mod S), so
/// each marginal keeps the full quantile set.
std::vector<Vec> exponential_quantile_atoms(int states, int dim, double rate);

/// G levels a + j (b - a) / G, j = 0..G-1. Grids nest when G divides G'.
Vec power_grid(const Support& support, int levels);

TinyInstance build_tiny(const TinyConfig& cfg);

/// Solution of the discretized program: every atom picks a grid point in
/// each coordinate.
struct BruteForceSolution {
  /// min over the budget price of the dual function; equals the optimum of
  /// the discretized program once mixing at a single atom is allowed, and is
  /// nondecreasing under grid refinement.
  double value = 0.0;
  /// g0 of the deterministic policy recovered at the price, which meets the budget.
  double feasible_value = 0.0;
  double multiplier = 0.0;  // budget price
  Vec lambda;               // full multiplier over the ergodic rows
  std::vector<Vec> policy;  // allocation per atom
  Vec expected_f;           // E f under `policy`
  int levels = 0;
};

/// Dual decomposition on the grid with bisection on the budget price and a
/// pointwise argmax per atom. Requires a budget row, g0 linear in x and the
/// rate coordinates of X not binding. Throws ContractViolation if no grid
/// policy meets the budget.
BruteForceSolution brute_force_primal(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                                      const Vec& probabilities, const Vec& levels);

/// (p_star - g0(x0)) / s; the Slater bound on ||lambda*||_1.
double lambda_norm_bound(double p_star_hat, double g0_at_slack_point, double slack);

/// |(p_hat_phi - p_star) / p_star|.
double normalized_gap(double p_hat_phi, double p_star);

struct SlaterPoint {
  Vec power;      // equal split of half the budget
  Vec x0;         // half the exact expected rates at `power`, budget row 0
  double g0_x0 = 0.0;
  double slack = 0.0;  // min over rows of E f(power) - x0
};

SlaterPoint tiny_slater_point(const TinyInstance& inst);

/// Largest difference quotient ||E f(p1) - E f(p2)||_inf / E ||p1 - p2||_inf
/// over random grid-policy pairs; half are single-cell neighbours to probe
/// local slopes. A lower bound on the true Lipschitz constant.
double lipschitz_estimate(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                          const Vec& probabilities, const Vec& levels, int pairs,
                          std::uint64_t seed);

/// E_h E_p ||p*(h) - p||_inf with p drawn from `policy`, exact over atoms.
double epsilon_estimate(const std::vector<Vec>& atoms, const Vec& probabilities,
                        const std::vector<Vec>& target, const AllocationFn& policy,
                        int samples_per_atom, std::uint64_t seed);

struct LagrangianEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Vec expected_f;
};

/// g0(x) + lambda^T (E f - x), stratified over atoms.
LagrangianEstimate lagrangian_on_atoms(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                                       const Vec& probabilities, const AllocationFn& policy,
                                       const Vec& x, const Vec& lambda, int samples_per_atom,
                                       std::uint64_t seed);

struct SandwichConfig {
  int samples_per_atom = 4000;
  int lipschitz_pairs = 10000;
  double se_multiplier = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DualityGapReport {
  double p_star_hat = 0.0;
  double d_phi_hat = 0.0;
  double d_phi_se = 0.0;
  double lambda_norm_bound = 0.0;
  double lambda_norm_oracle = 0.0;  // ||lambda*||_1 recovered by the grid solver
  double lipschitz_hat = 0.0;
  double eps_hat = 0.0;
  double refinement_residual = 0.0;
  double mc_tol = 0.0;
  double lower_bound = 0.0;  // p_star_hat - bound * L * eps - mc_tol
  double upper_bound = 0.0;  // p_star_hat + mc_tol
  bool upper_ok = false;
  bool lower_ok = false;
  bool sandwich_ok = false;
};

/// Checks p* - ||lambda*||_1 L eps - tol <= D <= p* + tol for a policy with
/// iterates (x, lambda). tol = se_multiplier * SE(D) + refinement_residual.
DualityGapReport check_sandwich(const TinyInstance& inst, const BruteForceSolution& oracle,
                                double refinement_residual, const AllocationFn& policy,
                                const Vec& x, const Vec& lambda, const SandwichConfig& cfg);

/// Trained-policy form: samples actions from theta.
DualityGapReport check_sandwich(const TinyInstance& inst, const BruteForceSolution& oracle,
                                double refinement_residual, const TrainerState& state,
                                const SandwichConfig& cfg);

/// Deterministic rule that returns the oracle allocation of the matching atom.
AllocationFn lookup_table_policy(const TinyInstance& inst, const std::vector<Vec>& table);

struct VerifyConfig {
  TinyConfig tiny;
  TrainerConfig trainer;
  SandwichConfig sandwich;
  bool lookup_table = false;  // score the oracle table instead of a trained policy
};

struct VerifyOutcome {
  DualityGapReport report;
  BruteForceSolution coarse;  // G levels
  BruteForceSolution fine;    // min(2G, 64) levels
  TrainerState state;
  std::vector<MetricRecord> log;
};

/// Grid solves at G and a refined grid, then either trains on the tiny
/// instance (or uses `initial`, when given) or takes the lookup table, and
/// checks the sandwich.
VerifyOutcome run_verify(const VerifyConfig& cfg, const RecordSink& sink = {},
                         const TrainerState* initial = nullptr);

/// The refined grid size used by run_verify.
int refined_levels(int levels);

}  // namespace pdlearn
