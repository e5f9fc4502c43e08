#include "pdlearn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pdlearn {

std::string to_string(EstimatorKind kind) {
  return kind == EstimatorKind::policy_gradient ? "policy-gradient" : "finite-difference";
}

EstimatorKind parse_estimator_kind(const std::string& s) {
  if (s == "policy-gradient" || s == "pg") return EstimatorKind::policy_gradient;
  if (s == "finite-difference" || s == "fd") return EstimatorKind::finite_difference;
  throw FormatError("unknown estimator kind '" + s + "'");
}

void TrainerConfig::validate() const {
  require(iters >= 0, "trainer: iters must be nonnegative");
  require(lr_theta > 0.0 && lr_x > 0.0 && lr_lambda > 0.0 && lr_mu > 0.0,
          "trainer: learning rates must be positive");
  require(dual_decay > 0.0 && dual_decay <= 1.0, "trainer: dual_decay must lie in (0, 1]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "trainer: ADAM betas must lie in [0, 1)");
  require(adam_eps > 0.0, "trainer: ADAM epsilon must be positive");
  require(batch >= 1, "trainer: batch must be >= 1");
  fd.validate();
}

double TrainerConfig::lambda_step(long k) const {
  return lr_lambda * std::pow(dual_decay, static_cast<double>(k));
}

double TrainerConfig::mu_step(long k) const {
  return lr_mu * std::pow(dual_decay, static_cast<double>(k));
}

TrainerStreams TrainerStreams::from_seed(std::uint64_t seed, long resume_at) {
  const std::uint64_t base =
      resume_at == 0 ? seed
                     : derive_seed(seed, "resume-" + std::to_string(resume_at));
  return {make_stream(base, "channel"), make_stream(base, "perturbation"),
          make_stream(base, "policy-sampling")};
}

Vec adam_direction(const Vec& grad, Vec& m, Vec& v, long k, double lr, double beta1, double beta2,
                   double eps) {
  require(k >= 1, "adam_direction: k must be >= 1");
  require(m.size() == grad.size() && v.size() == grad.size(), "adam_direction: size mismatch");
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(k));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(k));
  const Vec m_hat = m / c1;
  const Vec v_hat = v / c2;
  return lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
}

TrainerState initial_state(const ProblemSpec& problem, const StochasticPolicy& policy,
                           const TrainerConfig& cfg) {
  problem.validate();
  require(problem.x_box.lower.allFinite() && problem.x_box.upper.allFinite(),
          "trainer: x_box must be bounded to define its midpoint");
  Rng init = make_stream(cfg.seed, "init");
  TrainerState s;
  s.theta = policy.initial_theta(init);
  s.x = problem.x_box.midpoint();
  s.duals.lambda = Vec::Ones(problem.u_metrics);
  s.duals.mu = Vec::Ones(problem.r_utilities);
  s.adam_m = Vec::Zero(s.theta.size());
  s.adam_v = Vec::Zero(s.theta.size());
  s.k = 0;
  return s;
}

namespace {

// Mean of f over a fresh batch at the given theta. Stochastic policies draw
// actions; the finite-difference route plays the location of the law.
Vec batch_expected_f(const ProblemSpec& problem, const StochasticPolicy& policy, const Vec& theta,
                     const TrainerConfig& cfg, TrainerStreams& streams) {
  const Mat H = problem.sampler.draw_batch(streams.channel, cfg.batch);
  const Mat D = policy.distribution_batch(theta, H);
  Vec sum = Vec::Zero(problem.u_metrics);
  for (int b = 0; b < cfg.batch; ++b) {
    const Vec d = D.col(b);
    const Vec p = cfg.estimator == EstimatorKind::policy_gradient
                      ? policy.sample_action(d, streams.policy)
                      : policy.location_action(d);
    sum += problem.f(p, H.col(b));
  }
  return sum / cfg.batch;
}

Vec theta_gradient(const ProblemSpec& problem, const StochasticPolicy& policy, const Vec& theta,
                   const Vec& lambda, const TrainerConfig& cfg, TrainerStreams& streams) {
  if (cfg.estimator == EstimatorKind::policy_gradient)
    return policy_gradient(problem.f, policy, theta, lambda, cfg.batch, problem.sampler,
                           streams.policy);
  FdConfig fd = cfg.fd;
  fd.batch = cfg.batch;
  const ParameterizedAllocation phi = [&policy](const Vec& t, const Vec& h) {
    return policy.deterministic_action(t, h);
  };
  return fd_policy_jacobian(problem.f, phi, theta, fd, problem.sampler, streams.perturbation) *
         lambda;
}

bool state_finite(const TrainerState& s) {
  return s.theta.allFinite() && s.x.allFinite() && s.duals.lambda.allFinite() &&
         s.duals.mu.allFinite() && s.adam_m.allFinite() && s.adam_v.allFinite();
}

}  // namespace

StepResult step(const TrainerState& state, const ProblemSpec& problem,
                const StochasticPolicy& policy, const TrainerConfig& cfg, TrainerStreams& streams,
                const ExactOracles* oracles) {
  require(state.theta.size() == policy.num_params(), "step: theta length mismatch");
  require(state.x.size() == problem.u_metrics, "step: x has wrong dimension");
  require(state.duals.lambda.size() == problem.u_metrics, "step: lambda has wrong dimension");
  require(state.duals.mu.size() == problem.r_utilities, "step: mu has wrong dimension");
  require(cfg.estimator == EstimatorKind::policy_gradient ||
              policy.head() == OutputHead::truncated_gaussian,
          "step: finite differences need a continuous policy head");

  const long k = state.k;
  const Vec& lambda = state.duals.lambda;
  const Vec& mu = state.duals.mu;
  StepResult out{state, {}};
  TrainerState& next = out.state;

  // (1) theta ascent on lambda^T E f.
  const Vec grad_theta = oracles && oracles->grad_theta
                             ? oracles->grad_theta(state.theta, lambda)
                             : theta_gradient(problem, policy, state.theta, lambda, cfg, streams);
  next.theta = state.theta + adam_direction(grad_theta, next.adam_m, next.adam_v, k + 1, cfg);

  // (2) x ascent on g0(x) + mu^T g(x) - lambda^T x.
  FdConfig fd = cfg.fd;
  fd.batch = cfg.batch;
  Vec dx = oracles && oracles->grad_g0 ? oracles->grad_g0(state.x)
                                       : fd_grad_g0(problem.g0, state.x, fd, streams.perturbation);
  if (problem.r_utilities > 0) {
    const Mat jac = oracles && oracles->jacobian_g
                        ? oracles->jacobian_g(state.x)
                        : fd_jacobian_g(problem.g, state.x, problem.r_utilities, fd,
                                        streams.perturbation);
    dx += jac * mu;
  }
  dx -= lambda;
  next.x = project_box(state.x + cfg.lr_x * dx, problem.x_box);

  // (3) lambda descent on a fresh batch at the new theta.
  const Vec ef = oracles && oracles->expected_f
                     ? oracles->expected_f(next.theta)
                     : batch_expected_f(problem, policy, next.theta, cfg, streams);
  const Vec residual = ef - next.x;
  next.duals.lambda = project_nonneg(lambda - cfg.lambda_step(k) * residual);

  // (4) mu descent at the new x.
  if (problem.r_utilities > 0)
    next.duals.mu = project_nonneg(mu - cfg.mu_step(k) * problem.g(next.x));
  next.k = k + 1;

  MetricRecord& rec = out.record;
  rec.iter = k;
  rec.objective_g0x = problem.g0(next.x);
  rec.realized_utility = problem.g0(ef);
  rec.residual = residual;
  rec.constraint_residual_norm = residual.cwiseMin(0.0).norm();
  rec.power_residual = problem.budget_row >= 0 ? residual(problem.budget_row) : 0.0;
  rec.lambda_norm = next.duals.lambda.lpNorm<1>();
  rec.mu_norm = next.duals.mu.size() > 0 ? next.duals.mu.lpNorm<1>() : 0.0;

  if (!state_finite(next) || !residual.allFinite() || !std::isfinite(rec.objective_g0x) ||
      !std::isfinite(rec.realized_utility)) {
    std::ostringstream msg;
    msg << "non-finite iterate at iteration " << k;
    throw TrainingAborted(msg.str(), rec, state);
  }
  return out;
}

TrainResult train_from(TrainerState state, const ProblemSpec& problem,
                       const StochasticPolicy& policy, const TrainerConfig& cfg,
                       const RecordSink& sink, const ExactOracles* oracles) {
  cfg.validate();
  problem.validate();
  TrainerStreams streams = TrainerStreams::from_seed(cfg.seed, state.k);
  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.iters));
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < cfg.iters; ++i) {
    StepResult r = step(state, problem, policy, cfg, streams, oracles);
    r.record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (sink) sink(r.record);
    result.log.push_back(std::move(r.record));
    state = std::move(r.state);
  }
  result.state = std::move(state);
  return result;
}

TrainResult train(const ProblemSpec& problem, const StochasticPolicy& policy,
                  const TrainerConfig& cfg, const RecordSink& sink, const ExactOracles* oracles) {
  cfg.validate();
  return train_from(initial_state(problem, policy, cfg), problem, policy, cfg, sink, oracles);
}

TailSummary summarize_tail(const std::vector<MetricRecord>& log, double fraction, int blocks) {
  require(fraction > 0.0 && fraction <= 1.0, "summarize_tail: fraction must lie in (0, 1]");
  require(blocks >= 2, "summarize_tail: need at least two blocks");
  require(!log.empty(), "summarize_tail: empty log");
  const auto n = static_cast<long>(log.size());
  const long rows = std::max<long>(1, static_cast<long>(std::ceil(fraction * n)));
  const long first = n - rows;
  const Eigen::Index u = log.front().residual.size();

  TailSummary t;
  t.rows = static_cast<int>(rows);
  t.mean_residual = Vec::Zero(u);
  for (long i = first; i < n; ++i) {
    t.mean_residual += log[i].residual;
    t.mean_objective_g0x += log[i].objective_g0x;
    t.mean_realized_utility += log[i].realized_utility;
    t.mean_lambda_norm += log[i].lambda_norm;
  }
  t.mean_residual /= static_cast<double>(rows);
  t.mean_objective_g0x /= static_cast<double>(rows);
  t.mean_realized_utility /= static_cast<double>(rows);
  t.mean_lambda_norm /= static_cast<double>(rows);

  const long nb = std::min<long>(blocks, rows);
  if (nb < 2) {
    t.se_residual = Vec::Constant(u, std::numeric_limits<double>::infinity());
    return t;
  }
  const long per = rows / nb;
  Mat block_means = Mat::Zero(u, nb);
  for (long b = 0; b < nb; ++b) {
    for (long i = 0; i < per; ++i) block_means.col(b) += log[first + b * per + i].residual;
    block_means.col(b) /= static_cast<double>(per);
  }
  const Vec grand = block_means.rowwise().mean();
  const Vec var = (block_means.colwise() - grand).cwiseAbs2().rowwise().sum() / (nb - 1);
  t.se_residual = (var / static_cast<double>(nb)).cwiseSqrt();
  return t;
}

namespace {

void write_vec(std::ostream& os, const char* key, const Vec& v) {
  os << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
  os << '\n';
}

// Next line that is not a '#' comment.
bool content_line(std::istream& is, std::string& line) {
  while (std::getline(is, line))
    if (line.empty() || line[0] != '#') return true;
  return false;
}

Vec read_vec(std::istream& is, const std::string& key) {
  std::string line;
  if (!content_line(is, line)) throw FormatError("trainer state: missing '" + key + "'");
  std::istringstream ls(line);
  std::string got;
  long n = -1;
  if (!(ls >> got >> n) || got != key || n < 0)
    throw FormatError("trainer state: expected '" + key + "' line");
  Vec v(n);
  for (long i = 0; i < n; ++i)
    if (!(ls >> v(i))) throw FormatError("trainer state: truncated '" + key + "' values");
  return v;
}

}  // namespace

void save_trainer_state(const std::string& path, const TrainerState& state,
                        const std::vector<std::string>& comments) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : comments) os << "# " << c << '\n';
  os << "format pdlearn-trainer-state 1\n";
  os << "k " << state.k << '\n';
  write_vec(os, "x", state.x);
  write_vec(os, "lambda", state.duals.lambda);
  write_vec(os, "mu", state.duals.mu);
  write_vec(os, "adam_m", state.adam_m);
  write_vec(os, "adam_v", state.adam_v);
  os << "end\n";
}

TrainerState load_trainer_state(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open trainer state '" + path + "'");
  std::string line;
  if (!content_line(is, line) || line != "format pdlearn-trainer-state 1")
    throw FormatError("trainer state: bad format line");
  TrainerState s;
  if (!content_line(is, line)) throw FormatError("trainer state: missing counter");
  {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> s.k) || key != "k" || s.k < 0)
      throw FormatError("trainer state: bad counter line");
  }
  s.x = read_vec(is, "x");
  s.duals.lambda = read_vec(is, "lambda");
  s.duals.mu = read_vec(is, "mu");
  s.adam_m = read_vec(is, "adam_m");
  s.adam_v = read_vec(is, "adam_v");
  if (!content_line(is, line) || line != "end") throw FormatError("trainer state: missing end");
  return s;
}

}  // namespace pdlearn
