#pragma once

#include <string>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/mlp.hpp"
#include "pdlearn/policy_dist.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

enum class PolicyLayout {
  per_user,  // one SISO network per user, fed only that user's channel
  joint,     // one network fed the whole channel vector
};

std::string to_string(PolicyLayout layout);
PolicyLayout parse_policy_layout(const std::string& s);

/// Stochastic allocation policy pi_{h,theta}: an MLP (or a bank of per-user
/// MLPs) whose head emits truncated-Gaussian or Bernoulli parameters.
///
/// Distribution parameters use the head layout: (mu_1, sigma_1, ..., mu_m,
/// sigma_m) for the truncated Gaussian, (prob_1, ..., prob_m) for Bernoulli.
class StochasticPolicy {
 public:
  StochasticPolicy(MlpArchitecture arch, Support support, int users, PolicyLayout layout);

  const MlpArchitecture& architecture() const { return arch_; }
  const Support& support() const { return support_; }
  PolicyLayout layout() const { return layout_; }
  OutputHead head() const { return arch_.head; }
  int num_users() const { return users_; }
  int num_params() const;
  int input_dim() const;
  /// Distribution parameters per user (2 or 1).
  int params_per_user() const { return arch_.head == OutputHead::truncated_gaussian ? 2 : 1; }

  Vec initial_theta(Rng& rng) const;

  /// Distribution parameters, one column per channel column of H.
  Mat distribution_batch(const Vec& theta, const Mat& H) const;
  Vec distribution(const Vec& theta, const Vec& h) const;

  Vec sample_action(const Vec& dist_params, Rng& rng) const;
  /// Location of the law: mu for the truncated Gaussian. Not defined for Bernoulli.
  Vec location_action(const Vec& dist_params) const;
  double log_prob(const Vec& dist_params, const Vec& p) const;
  /// d log pi(p) / d (distribution parameters), head layout.
  Vec score(const Vec& dist_params, const Vec& p) const;

  /// sum_b d/dtheta [ upstream(:, b)^T distribution(theta, H(:, b)) ].
  Vec backward_batch(const Vec& theta, const Mat& H, const Mat& upstream) const;

  // Convenience single-sample API (used by the generic estimators).
  Vec sample(const Vec& theta, const Vec& h, Rng& rng) const;
  double log_prob(const Vec& theta, const Vec& h, const Vec& p) const;
  Vec grad_log_prob(const Vec& theta, const Vec& h, const Vec& p) const;
  /// Deterministic allocation h -> location_action(distribution(theta, h)).
  Vec deterministic_action(const Vec& theta, const Vec& h) const;

  /// Network of user i (per-user layout) or the single network (joint).
  PolicyModel network(const Vec& theta, int index = 0) const;

  /// `comments` become leading '#' lines, which the loader skips.
  void save(const std::string& path, const Vec& theta,
            const std::vector<std::string>& comments = {}) const;
  /// Loads a checkpoint written by save(); returns the policy and its theta.
  static std::pair<StochasticPolicy, Vec> load(const std::string& path);

 private:
  int net_params() const { return arch_.num_params(); }
  int num_networks() const { return layout_ == PolicyLayout::per_user ? users_ : 1; }

  MlpArchitecture arch_;
  Support support_;
  int users_;
  PolicyLayout layout_;
};

}  // namespace pdlearn
