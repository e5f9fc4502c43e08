#include "pdlearn/problem.hpp"

#include <cmath>
#include <limits>

namespace pdlearn {

ChannelSampler ChannelSampler::exponential(int dim, double rate, std::uint64_t seed) {
  ChannelSampler s;
  s.law = ChannelLaw::exponential_rate;
  s.dim = dim;
  s.rate = rate;
  s.rng_seed = seed;
  s.validate();
  return s;
}

ChannelSampler ChannelSampler::discrete_law(std::vector<Vec> atoms, Vec probabilities,
                                            std::uint64_t seed) {
  require(!atoms.empty(), "discrete channel law needs at least one atom");
  ChannelSampler s;
  s.law = ChannelLaw::discrete;
  s.dim = static_cast<int>(atoms.front().size());
  s.atoms = std::move(atoms);
  s.probabilities = std::move(probabilities);
  s.rng_seed = seed;
  s.validate();
  return s;
}

void ChannelSampler::validate() const {
  require(dim > 0, "channel dimension must be positive");
  if (law == ChannelLaw::exponential_rate) {
    require(rate > 0.0 && std::isfinite(rate), "exponential channel rate must be positive");
    return;
  }
  require(static_cast<Eigen::Index>(atoms.size()) == probabilities.size(),
          "discrete law: atom/probability count mismatch");
  for (const auto& a : atoms) {
    require(a.size() == dim, "discrete law: atom dimension mismatch");
    require((a.array() > 0.0).all(), "discrete law: atoms must be strictly positive");
  }
  require((probabilities.array() >= 0.0).all(), "discrete law: negative probability");
  require(std::abs(probabilities.sum() - 1.0) < 1e-9, "discrete law: probabilities must sum to 1");
}

Vec ChannelSampler::draw(Rng& rng) const {
  if (law == ChannelLaw::exponential_rate) {
    Vec h(dim);
    for (int i = 0; i < dim; ++i) h(i) = -std::log(uniform_open(rng)) / rate;
    return h;
  }
  const double u = uniform_open(rng);
  double acc = 0.0;
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    acc += probabilities(static_cast<Eigen::Index>(s));
    if (u < acc) return atoms[s];
  }
  return atoms.back();
}

Mat ChannelSampler::draw_batch(Rng& rng, int batch) const {
  Mat H(dim, batch);
  for (int b = 0; b < batch; ++b) H.col(b) = draw(rng);
  return H;
}

bool Box::contains(const Vec& v, double tol) const {
  return v.size() == lower.size() && ((v.array() >= lower.array() - tol).all()) &&
         ((v.array() <= upper.array() + tol).all());
}

void ProblemSpec::validate() const {
  require(n_channels > 0 && m_resources > 0 && u_metrics > 0 && r_utilities >= 0,
          "problem dimensions must be positive");
  require(static_cast<bool>(f) && static_cast<bool>(g0), "problem needs f and g0");
  require(r_utilities == 0 || static_cast<bool>(g), "problem with r > 0 needs g");
  require(x_box.size() == u_metrics, "x_box dimension must equal u");
  require((x_box.lower.array() <= x_box.upper.array()).all(), "x_box lower > upper");
  require(p_box.size() == m_resources, "p_box dimension must equal m");
  require((p_box.lower.array() >= 0.0).all(), "p_box lower bound must be nonnegative");
  require((p_box.lower.array() <= p_box.upper.array()).all(), "p_box lower > upper");
  require(sampler.dim == n_channels, "sampler dimension must equal n");
  require(budget_row >= -1 && budget_row < u_metrics, "budget_row out of range");
  sampler.validate();
}

Vec ProblemSpec::eval_g(const Vec& x) const {
  if (r_utilities == 0) return Vec(0);
  return g(x);
}

bool ProblemSpec::allocation_admissible(const Vec& p) const {
  if (p.size() != m_resources || !p.allFinite()) return false;
  if (binary_allocation) return ((p.array() == 0.0) || (p.array() == 1.0)).all();
  return p_box.contains(p);
}

double evaluate_lagrangian(const ProblemSpec& problem, const Vec& x, const DualIterates& duals,
                           const Vec& ef_estimate) {
  require(x.size() == problem.u_metrics, "evaluate_lagrangian: x has wrong dimension");
  require(ef_estimate.size() == problem.u_metrics, "evaluate_lagrangian: E f has wrong dimension");
  require(duals.lambda.size() == problem.u_metrics, "evaluate_lagrangian: lambda has wrong dimension");
  require(duals.mu.size() == problem.r_utilities, "evaluate_lagrangian: mu has wrong dimension");
  double value = problem.g0(x) + duals.lambda.dot(ef_estimate - x);
  if (problem.r_utilities > 0) value += duals.mu.dot(problem.g(x));
  return value;
}

MonteCarloEstimate estimate_expected_f_with_error(const ProblemSpec& problem,
                                                  const AllocationFn& policy, int batch,
                                                  std::uint64_t seed) {
  require(batch >= 1, "estimate_expected_f: batch must be >= 1");
  Rng channel_rng = make_stream(seed, "channel");
  Rng action_rng = make_stream(seed, "policy-sampling");

  const Eigen::Index u = problem.u_metrics;
  Vec mean = Vec::Zero(u);
  Vec m2 = Vec::Zero(u);
  for (int b = 0; b < batch; ++b) {
    const Vec h = problem.sampler.draw(channel_rng);
    const Vec p = policy(h, action_rng);
    require(problem.allocation_admissible(p), "estimate_expected_f: policy output outside P");
    const Vec fv = problem.f(p, h);
    require(fv.size() == u, "estimate_expected_f: f has wrong dimension");
    const Vec delta = fv - mean;
    mean += delta / (b + 1);
    m2 += delta.cwiseProduct(fv - mean);
  }
  MonteCarloEstimate est;
  est.samples = batch;
  est.mean = mean;
  if (batch > 1) {
    est.std_error = (m2 / (static_cast<double>(batch) * (batch - 1))).cwiseSqrt();
  } else {
    est.std_error = Vec::Constant(u, std::numeric_limits<double>::infinity());
  }
  return est;
}

Vec estimate_expected_f(const ProblemSpec& problem, const AllocationFn& policy, int batch,
                        std::uint64_t seed) {
  return estimate_expected_f_with_error(problem, policy, batch, seed).mean;
}

}  // namespace pdlearn
