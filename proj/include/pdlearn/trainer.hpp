#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/estimators.hpp"
#include "pdlearn/policy.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

enum class EstimatorKind { finite_difference, policy_gradient };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& s);

struct TrainerConfig {
  int iters = 40000;
  double lr_theta = 5e-4;
  double lr_x = 5e-4;
  double lr_lambda = 5e-4;
  double lr_mu = 5e-4;
  /// Per-iteration factor applied to the dual step sizes.
  double dual_decay = 0.99995;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch = 32;
  FdConfig fd;
  EstimatorKind estimator = EstimatorKind::policy_gradient;
  std::uint64_t seed = 0;

  void validate() const;
  double lambda_step(long k) const;
  double mu_step(long k) const;
};

struct TrainerState {
  Vec theta;
  Vec x;
  DualIterates duals;
  Vec adam_m;
  Vec adam_v;
  long k = 0;  // completed iterations
};

/// One row of the training log.
struct MetricRecord {
  long iter = 0;
  double objective_g0x = 0.0;             // g0(x)
  double realized_utility = 0.0;          // g0(E f) on the dual-update batch
  double constraint_residual_norm = 0.0;  // ||min(E f - x, 0)||_2, zero when feasible
  double power_residual = 0.0;            // E f - x on the budget row (0 if none)
  double lambda_norm = 0.0;               // ||lambda||_1
  double mu_norm = 0.0;                   // ||mu||_1
  double wall_ms = 0.0;
  Vec residual;                           // E f - x, per ergodic constraint
};

/// Random streams consumed by the trainer, all derived from the run seed.
struct TrainerStreams {
  Rng channel;       // channel draws of the dual update
  Rng perturbation;  // finite-difference directions
  Rng policy;        // estimator batches and policy actions

  static TrainerStreams from_seed(std::uint64_t seed, long resume_at = 0);
};

/// ADAM ascent direction at step k >= 1; updates the moments in place.
/// direction = lr * m_hat / (sqrt(v_hat) + eps).
Vec adam_direction(const Vec& grad, Vec& m, Vec& v, long k, double lr, double beta1, double beta2,
                   double eps);

inline Vec adam_direction(const Vec& grad, Vec& m, Vec& v, long k, const TrainerConfig& cfg) {
  return adam_direction(grad, m, v, k, cfg.lr_theta, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
}

/// theta from the "init" stream, x at the box midpoint, unit multipliers.
TrainerState initial_state(const ProblemSpec& problem, const StochasticPolicy& policy,
                           const TrainerConfig& cfg);

/// Exact replacements for the sampled quantities of a step. Any member left
/// empty falls back to its estimator. Used by noise-free sanity harnesses.
struct ExactOracles {
  std::function<Vec(const Vec& x)> grad_g0;
  std::function<Mat(const Vec& x)> jacobian_g;  // u x r
  std::function<Vec(const Vec& theta, const Vec& lambda)> grad_theta;  // of lambda^T E f
  std::function<Vec(const Vec& theta)> expected_f;
};

struct StepResult {
  TrainerState state;
  MetricRecord record;
};

/// Thrown when an iterate or estimate becomes non-finite. Carries the
/// offending record and the last finite state.
class TrainingAborted : public NumericalFailure {
 public:
  TrainingAborted(const std::string& what, MetricRecord record, TrainerState last_good)
      : NumericalFailure(what), record(std::move(record)), last_good(std::move(last_good)) {}

  MetricRecord record;
  TrainerState last_good;
};

/// One model-free primal-dual iteration, in order: theta ascent (ADAM),
/// x ascent with projection onto X, lambda descent at the new theta and x on
/// a fresh channel batch, mu descent at the new x.
StepResult step(const TrainerState& state, const ProblemSpec& problem,
                const StochasticPolicy& policy, const TrainerConfig& cfg, TrainerStreams& streams,
                const ExactOracles* oracles = nullptr);

struct TrainResult {
  TrainerState state;
  std::vector<MetricRecord> log;
};

using RecordSink = std::function<void(const MetricRecord&)>;

/// Runs cfg.iters steps from initial_state. Deterministic given cfg.seed.
TrainResult train(const ProblemSpec& problem, const StochasticPolicy& policy,
                  const TrainerConfig& cfg, const RecordSink& sink = {},
                  const ExactOracles* oracles = nullptr);

/// Runs cfg.iters further steps from an explicit state. A state with k > 0
/// gets streams derived from (cfg.seed, k), so a resumed run is reproducible
/// but not bit-identical to an uninterrupted one.
TrainResult train_from(TrainerState state, const ProblemSpec& problem,
                       const StochasticPolicy& policy, const TrainerConfig& cfg,
                       const RecordSink& sink = {}, const ExactOracles* oracles = nullptr);

/// Averages over the final `fraction` of a log. Standard errors use batch
/// means over `blocks` contiguous blocks, which tolerates the serial
/// correlation of the iterates.
struct TailSummary {
  Vec mean_residual;
  Vec se_residual;
  double mean_objective_g0x = 0.0;
  double mean_realized_utility = 0.0;
  double mean_lambda_norm = 0.0;
  int rows = 0;
};

TailSummary summarize_tail(const std::vector<MetricRecord>& log, double fraction = 0.1,
                           int blocks = 20);

/// Sidecar with x, multipliers, ADAM moments and the iteration counter.
/// `comments` become leading '#' lines, which the loader skips.
void save_trainer_state(const std::string& path, const TrainerState& state,
                        const std::vector<std::string>& comments = {});
/// theta is not part of the sidecar; the caller restores it from the policy checkpoint.
TrainerState load_trainer_state(const std::string& path);

}  // namespace pdlearn
