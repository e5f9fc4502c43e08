#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

enum class ChannelLaw {
  exponential_rate,  // i.i.d. Exp(rate) per component
  discrete,          // finite set of atoms with probabilities (desk-scale oracles only)
};

/// Law of the fading state h.
struct ChannelSampler {
  ChannelLaw law = ChannelLaw::exponential_rate;
  double rate = 2.0;
  int dim = 1;
  std::uint64_t rng_seed = 0;

  // discrete law only
  std::vector<Vec> atoms;
  Vec probabilities;

  static ChannelSampler exponential(int dim, double rate, std::uint64_t seed = 0);
  static ChannelSampler discrete_law(std::vector<Vec> atoms, Vec probabilities,
                                     std::uint64_t seed = 0);

  void validate() const;
  Vec draw(Rng& rng) const;
  /// dim x batch, one draw per column.
  Mat draw_batch(Rng& rng, int batch) const;
};

/// Closed box [lower, upper]; infinite bounds are allowed.
struct Box {
  Vec lower;
  Vec upper;

  Eigen::Index size() const { return lower.size(); }
  Vec midpoint() const { return 0.5 * (lower + upper); }
  bool contains(const Vec& v, double tol = 0.0) const;
};

using PerformanceFn = std::function<Vec(const Vec& p, const Vec& h)>;
using UtilityFn = std::function<double(const Vec& x)>;
using ConstraintUtilityFn = std::function<Vec(const Vec& x)>;

/// One constrained resource-allocation program:
///
///   max g0(x)  s.t.  x <= E[f(p(h), h)],  g(x) >= 0,  x in X,  p in P.
struct ProblemSpec {
  int n_channels = 1;
  int m_resources = 1;
  int u_metrics = 1;
  int r_utilities = 0;

  PerformanceFn f;
  UtilityFn g0;
  ConstraintUtilityFn g;  // empty when r_utilities == 0

  Box x_box;
  Box p_box;
  bool binary_allocation = false;  // P = {0,1}^m instead of the p_box
  /// Row of f that carries a power budget, or -1. Only used for reporting.
  int budget_row = -1;

  ChannelSampler sampler;

  void validate() const;
  Vec eval_g(const Vec& x) const;
  bool allocation_admissible(const Vec& p) const;
};

struct DualIterates {
  Vec lambda;  // ergodic constraints, size u
  Vec mu;      // utility constraints, size r
};

/// g0(x) + mu^T g(x) + lambda^T (ef_estimate - x).
double evaluate_lagrangian(const ProblemSpec& problem, const Vec& x, const DualIterates& duals,
                           const Vec& ef_estimate);

/// Componentwise clamp onto [lower, upper].
template <typename DerivedV, typename DerivedL, typename DerivedU>
Vec project_box(const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedL>& lower,
                const Eigen::MatrixBase<DerivedU>& upper) {
  require(v.size() == lower.size() && v.size() == upper.size(), "project_box: size mismatch");
  require((lower.array() <= upper.array()).all(), "project_box: lower > upper");
  return v.cwiseMax(lower).cwiseMin(upper);
}

inline Vec project_box(const Vec& v, const Box& box) { return project_box(v, box.lower, box.upper); }

/// Projection onto the nonnegative orthant.
template <typename Derived>
Vec project_nonneg(const Eigen::MatrixBase<Derived>& v) {
  return v.cwiseMax(0.0);
}

/// Allocation rule h -> p. Deterministic rules ignore the generator.
using AllocationFn = std::function<Vec(const Vec& h, Rng& rng)>;

struct MonteCarloEstimate {
  Vec mean;
  Vec std_error;
  int samples = 0;
};

/// Sample mean of f(p(h), h) over `batch` i.i.d. channel draws. Channel and
/// action randomness come from independent streams derived from `seed`.
/// Throws ContractViolation if the rule leaves P.
Vec estimate_expected_f(const ProblemSpec& problem, const AllocationFn& policy, int batch,
                        std::uint64_t seed);

/// Same estimator, also reporting per-component standard errors.
MonteCarloEstimate estimate_expected_f_with_error(const ProblemSpec& problem,
                                                  const AllocationFn& policy, int batch,
                                                  std::uint64_t seed);

}  // namespace pdlearn
