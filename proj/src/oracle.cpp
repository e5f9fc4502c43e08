#include "pdlearn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pdlearn {

namespace {

constexpr int kAtomStride = 7;

// E f under a per-atom allocation table, exact over the atoms.
Vec expected_f_table(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                     const Vec& probabilities, const std::vector<Vec>& table) {
  Vec ef = Vec::Zero(problem.u_metrics);
  for (std::size_t s = 0; s < atoms.size(); ++s)
    ef += probabilities(static_cast<Eigen::Index>(s)) * problem.f(table[s], atoms[s]);
  return ef;
}

// Weights of a linear g0, checked at one extra point.
Vec linear_weights(const ProblemSpec& problem) {
  const Eigen::Index u = problem.u_metrics;
  const double base = problem.g0(Vec::Zero(u));
  Vec w(u);
  for (Eigen::Index i = 0; i < u; ++i) w(i) = problem.g0(Vec::Unit(u, i)) - base;
  const Vec probe = Vec::LinSpaced(u, 0.3, 1.7);
  const double expect = base + w.dot(probe);
  require(std::abs(problem.g0(probe) - expect) <= 1e-9 * std::max(1.0, std::abs(expect)),
          "brute_force_primal: g0 must be linear");
  return w;
}

void check_law(const std::vector<Vec>& atoms, const Vec& probabilities) {
  require(!atoms.empty() && static_cast<Eigen::Index>(atoms.size()) == probabilities.size(),
          "oracle: atom/probability count mismatch");
  require((probabilities.array() >= 0.0).all() && std::abs(probabilities.sum() - 1.0) < 1e-9,
          "oracle: probabilities must sum to 1");
}

}  // namespace

void TinyConfig::validate() const {
  require(users >= 1 && users <= 2, "tiny: users must be 1 or 2");
  require(states >= 1 && states <= 32, "tiny: states must be in [1, 32]");
  require(levels >= 1 && levels <= 64, "tiny: levels must be in [1, 64]");
  require(p_max > 0.0 && weight > 0.0 && noise > 0.0 && channel_rate > 0.0 && rate_cap > 0.0,
          "tiny: parameters must be positive");
  require(support.lower >= 0.0 && support.lower < support.upper, "tiny: bad support");
}

std::vector<Vec> exponential_quantile_atoms(int states, int dim, double rate) {
  require(states >= 1 && dim >= 1 && dim <= 2 && rate > 0.0,
          "exponential_quantile_atoms: invalid arguments");
  std::vector<Vec> atoms(static_cast<std::size_t>(states), Vec(dim));
  for (int s = 0; s < states; ++s) {
    for (int d = 0; d < dim; ++d) {
      const int idx = d == 0 ? s : (s * kAtomStride) % states;
      const double q = (idx + 0.5) / states;
      atoms[static_cast<std::size_t>(s)](d) = -std::log1p(-q) / rate;
    }
  }
  return atoms;
}

Vec power_grid(const Support& support, int levels) {
  require(levels >= 1, "power_grid: need at least one level");
  require(support.lower < support.upper, "power_grid: bad support");
  Vec g(levels);
  for (int j = 0; j < levels; ++j) g(j) = support.lower + j * support.width() / levels;
  return g;
}

TinyInstance build_tiny(const TinyConfig& cfg) {
  cfg.validate();
  AwgnConfig a;
  a.m = cfg.users;
  a.weights = Vec::Constant(cfg.users, cfg.weight);
  a.noises = Vec::Constant(cfg.users, cfg.noise);
  a.p_max = cfg.p_max;
  a.support = cfg.support;
  a.channel_rate = cfg.channel_rate;
  a.rate_cap = cfg.rate_cap;
  a.hidden = cfg.hidden;
  a.bias = cfg.bias;
  TinyInstance inst{cfg, build_awgn(a), {}, {}, {}};
  inst.atoms = exponential_quantile_atoms(cfg.states, cfg.users, cfg.channel_rate);
  inst.probabilities = Vec::Constant(cfg.states, 1.0 / cfg.states);
  inst.bundle.problem.sampler = ChannelSampler::discrete_law(inst.atoms, inst.probabilities);
  inst.bundle.problem.validate();
  inst.levels = power_grid(cfg.support, cfg.levels);
  return inst;
}

BruteForceSolution brute_force_primal(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                                      const Vec& probabilities, const Vec& levels) {
  problem.validate();
  check_law(atoms, probabilities);
  const int m = problem.m_resources;
  const int S = static_cast<int>(atoms.size());
  const int G = static_cast<int>(levels.size());
  require(m <= 2 && S <= 32 && G >= 1 && G <= 64, "brute_force_primal: needs m <= 2, S <= 32, G <= 64");
  require(problem.r_utilities == 0, "brute_force_primal: utility constraints not supported");
  const int b = problem.budget_row;
  require(b >= 0, "brute_force_primal: problem has no budget row");
  const Vec w = linear_weights(problem);
  require(w(b) == 0.0, "brute_force_primal: g0 must not weigh the budget row");

  int combos = 1;
  for (int i = 0; i < m; ++i) combos *= G;
  std::vector<Vec> candidates(static_cast<std::size_t>(combos), Vec(m));
  for (int c = 0; c < combos; ++c) {
    int rest = c;
    for (int i = 0; i < m; ++i) {
      candidates[static_cast<std::size_t>(c)](i) = levels(rest % G);
      rest /= G;
    }
  }
  // Per atom and candidate: weighted utility and budget-row value.
  Mat util(S, combos), budget(S, combos);
  for (int s = 0; s < S; ++s) {
    for (int c = 0; c < combos; ++c) {
      const Vec fv = problem.f(candidates[static_cast<std::size_t>(c)], atoms[static_cast<std::size_t>(s)]);
      require(fv.allFinite(), "brute_force_primal: non-finite f");
      util(s, c) = w.dot(fv);
      budget(s, c) = fv(b);
    }
  }

  // Argmax at a price; ties go to the larger budget value so E f_b is monotone.
  auto argmax_at = [&](double price) {
    std::vector<int> pick(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
      int best = 0;
      double best_val = util(s, 0) + price * budget(s, 0);
      for (int c = 1; c < combos; ++c) {
        const double val = util(s, c) + price * budget(s, c);
        if (val > best_val || (val == best_val && budget(s, c) > budget(s, best))) {
          best = c;
          best_val = val;
        }
      }
      pick[static_cast<std::size_t>(s)] = best;
    }
    return pick;
  };
  auto mean_budget = [&](const std::vector<int>& pick) {
    double acc = 0.0;
    for (int s = 0; s < S; ++s) acc += probabilities(s) * budget(s, pick[static_cast<std::size_t>(s)]);
    return acc;
  };

  double most = 0.0;
  for (int s = 0; s < S; ++s) most += probabilities(s) * budget.row(s).maxCoeff();
  require(most >= 0.0, "brute_force_primal: no grid policy meets the budget");

  double price = 0.0;
  std::vector<int> pick = argmax_at(0.0);
  if (mean_budget(pick) < 0.0) {
    double lo = 0.0, hi = 1.0;
    while (mean_budget(argmax_at(hi)) < 0.0) {
      hi *= 2.0;
      if (hi > 1e12) throw NumericalFailure("brute_force_primal: budget price diverged");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_budget(argmax_at(mid)) < 0.0 ? lo : hi) = mid;
    }
    price = hi;
    pick = argmax_at(hi);
  }

  BruteForceSolution sol;
  sol.levels = G;
  sol.multiplier = price;
  sol.policy.reserve(static_cast<std::size_t>(S));
  double dual = 0.0;
  for (int s = 0; s < S; ++s) {
    const int c = pick[static_cast<std::size_t>(s)];
    dual += probabilities(s) * (util(s, c) + price * budget(s, c));
    sol.policy.push_back(candidates[static_cast<std::size_t>(c)]);
  }
  sol.value = dual;
  sol.expected_f = expected_f_table(problem, atoms, probabilities, sol.policy);
  sol.feasible_value = w.dot(sol.expected_f);
  for (Eigen::Index i = 0; i < problem.u_metrics; ++i) {
    if (i == b) continue;
    require(sol.expected_f(i) <= problem.x_box.upper(i) + 1e-12,
            "brute_force_primal: the rate cap of X binds");
  }
  sol.lambda = w;
  sol.lambda(b) = price;
  return sol;
}

double lambda_norm_bound(double p_star_hat, double g0_at_slack_point, double slack) {
  require(slack > 0.0, "lambda_norm_bound: slack must be positive");
  return (p_star_hat - g0_at_slack_point) / slack;
}

double normalized_gap(double p_hat_phi, double p_star) {
  require(p_star != 0.0, "normalized_gap: p_star must be nonzero");
  return std::abs((p_hat_phi - p_star) / p_star);
}

SlaterPoint tiny_slater_point(const TinyInstance& inst) {
  const ProblemSpec& problem = inst.bundle.problem;
  const int m = problem.m_resources;
  SlaterPoint sp;
  sp.power = Vec::Constant(m, 0.5 * inst.cfg.p_max / m);
  const std::vector<Vec> table(inst.atoms.size(), sp.power);
  const Vec ef = expected_f_table(problem, inst.atoms, inst.probabilities, table);
  sp.x0 = 0.5 * ef;
  sp.x0(problem.budget_row) = 0.0;
  sp.slack = (ef - sp.x0).minCoeff();
  sp.g0_x0 = problem.g0(sp.x0);
  return sp;
}

double lipschitz_estimate(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                          const Vec& probabilities, const Vec& levels, int pairs,
                          std::uint64_t seed) {
  check_law(atoms, probabilities);
  require(pairs >= 1 && levels.size() >= 2, "lipschitz_estimate: need pairs and two levels");
  const int m = problem.m_resources;
  const int S = static_cast<int>(atoms.size());
  const int G = static_cast<int>(levels.size());
  Rng rng = make_stream(seed, "lipschitz");
  std::uniform_int_distribution<int> level(0, G - 1), atom(0, S - 1), user(0, m - 1);
  std::vector<Eigen::VectorXi> idx1(static_cast<std::size_t>(S)), idx2(static_cast<std::size_t>(S));
  auto table_of = [&](const std::vector<Eigen::VectorXi>& idx) {
    std::vector<Vec> t(static_cast<std::size_t>(S), Vec(m));
    for (int s = 0; s < S; ++s)
      for (int i = 0; i < m; ++i) t[static_cast<std::size_t>(s)](i) = levels(idx[static_cast<std::size_t>(s)](i));
    return t;
  };
  double best = 0.0;
  for (int k = 0; k < pairs; ++k) {
    for (auto& v : idx1) {
      v.resize(m);
      for (int i = 0; i < m; ++i) v(i) = level(rng);
    }
    if (k % 2 == 0) {
      for (auto& v : idx2) {
        v.resize(m);
        for (int i = 0; i < m; ++i) v(i) = level(rng);
      }
    } else {
      idx2 = idx1;
      const int s = atom(rng), i = user(rng);
      int& cell = idx2[static_cast<std::size_t>(s)](i);
      cell = cell == 0 ? 1 : (cell == G - 1 ? G - 2 : cell + ((rng() & 1u) ? 1 : -1));
    }
    const std::vector<Vec> t1 = table_of(idx1), t2 = table_of(idx2);
    double dist = 0.0;
    for (int s = 0; s < S; ++s)
      dist += probabilities(s) *
              (t1[static_cast<std::size_t>(s)] - t2[static_cast<std::size_t>(s)]).lpNorm<Eigen::Infinity>();
    if (dist <= 0.0) continue;
    const Vec diff = expected_f_table(problem, atoms, probabilities, t1) -
                     expected_f_table(problem, atoms, probabilities, t2);
    best = std::max(best, diff.lpNorm<Eigen::Infinity>() / dist);
  }
  return best;
}

double epsilon_estimate(const std::vector<Vec>& atoms, const Vec& probabilities,
                        const std::vector<Vec>& target, const AllocationFn& policy,
                        int samples_per_atom, std::uint64_t seed) {
  check_law(atoms, probabilities);
  require(target.size() == atoms.size() && samples_per_atom >= 1,
          "epsilon_estimate: target table size mismatch");
  Rng rng = make_stream(seed, "policy-sampling");
  double acc = 0.0;
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    double inner = 0.0;
    for (int n = 0; n < samples_per_atom; ++n)
      inner += (target[s] - policy(atoms[s], rng)).lpNorm<Eigen::Infinity>();
    acc += probabilities(static_cast<Eigen::Index>(s)) * inner / samples_per_atom;
  }
  return acc;
}

LagrangianEstimate lagrangian_on_atoms(const ProblemSpec& problem, const std::vector<Vec>& atoms,
                                       const Vec& probabilities, const AllocationFn& policy,
                                       const Vec& x, const Vec& lambda, int samples_per_atom,
                                       std::uint64_t seed) {
  check_law(atoms, probabilities);
  require(samples_per_atom >= 2, "lagrangian_on_atoms: need two samples per atom");
  require(x.size() == problem.u_metrics && lambda.size() == problem.u_metrics,
          "lagrangian_on_atoms: size mismatch");
  Rng rng = make_stream(seed, "policy-sampling");
  LagrangianEstimate out;
  out.expected_f = Vec::Zero(problem.u_metrics);
  double var = 0.0;
  const double n = samples_per_atom;
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    Vec mean = Vec::Zero(problem.u_metrics);
    double smean = 0.0, sm2 = 0.0;
    for (int k = 0; k < samples_per_atom; ++k) {
      const Vec p = policy(atoms[s], rng);
      require(problem.allocation_admissible(p), "lagrangian_on_atoms: allocation outside P");
      const Vec fv = problem.f(p, atoms[s]);
      mean += (fv - mean) / (k + 1);
      const double y = lambda.dot(fv);
      const double d = y - smean;
      smean += d / (k + 1);
      sm2 += d * (y - smean);
    }
    const double prob = probabilities(static_cast<Eigen::Index>(s));
    out.expected_f += prob * mean;
    var += prob * prob * sm2 / (n - 1) / n;
  }
  out.value = problem.g0(x) + lambda.dot(out.expected_f - x);
  out.std_error = std::sqrt(var);
  return out;
}

void SandwichConfig::validate() const {
  require(samples_per_atom >= 2 && lipschitz_pairs >= 1 && se_multiplier >= 0.0,
          "sandwich: invalid sample counts");
}

DualityGapReport check_sandwich(const TinyInstance& inst, const BruteForceSolution& oracle,
                                double refinement_residual, const AllocationFn& policy,
                                const Vec& x, const Vec& lambda, const SandwichConfig& cfg) {
  cfg.validate();
  require(refinement_residual >= 0.0, "check_sandwich: refinement residual must be >= 0");
  const ProblemSpec& problem = inst.bundle.problem;
  DualityGapReport r;
  r.p_star_hat = oracle.value;
  r.lambda_norm_oracle = oracle.lambda.lpNorm<1>();
  const SlaterPoint sp = tiny_slater_point(inst);
  r.lambda_norm_bound = lambda_norm_bound(oracle.value, sp.g0_x0, sp.slack);
  r.lipschitz_hat = lipschitz_estimate(problem, inst.atoms, inst.probabilities, inst.levels,
                                       cfg.lipschitz_pairs, cfg.seed);
  r.eps_hat = epsilon_estimate(inst.atoms, inst.probabilities, oracle.policy, policy,
                               cfg.samples_per_atom, derive_seed(cfg.seed, "epsilon"));
  const LagrangianEstimate lag =
      lagrangian_on_atoms(problem, inst.atoms, inst.probabilities, policy, x, lambda,
                          cfg.samples_per_atom, derive_seed(cfg.seed, "lagrangian"));
  r.d_phi_hat = lag.value;
  r.d_phi_se = lag.std_error;
  r.refinement_residual = refinement_residual;
  r.mc_tol = cfg.se_multiplier * lag.std_error + refinement_residual;
  r.upper_bound = r.p_star_hat + r.mc_tol;
  r.lower_bound =
      r.p_star_hat - std::max(0.0, r.lambda_norm_bound) * r.lipschitz_hat * r.eps_hat - r.mc_tol;
  r.upper_ok = r.d_phi_hat <= r.upper_bound;
  r.lower_ok = r.d_phi_hat >= r.lower_bound;
  const bool finite = std::isfinite(r.d_phi_hat) && std::isfinite(r.lipschitz_hat) &&
                      std::isfinite(r.eps_hat) && std::isfinite(r.lambda_norm_bound);
  r.sandwich_ok = finite && r.upper_ok && r.lower_ok;
  return r;
}

DualityGapReport check_sandwich(const TinyInstance& inst, const BruteForceSolution& oracle,
                                double refinement_residual, const TrainerState& state,
                                const SandwichConfig& cfg) {
  const StochasticPolicy& pol = inst.bundle.policy;
  require(state.theta.size() == pol.num_params(), "check_sandwich: theta has wrong size");
  const Vec theta = state.theta;
  AllocationFn fn = [&pol, theta](const Vec& h, Rng& rng) { return pol.sample(theta, h, rng); };
  return check_sandwich(inst, oracle, refinement_residual, fn, state.x, state.duals.lambda, cfg);
}

AllocationFn lookup_table_policy(const TinyInstance& inst, const std::vector<Vec>& table) {
  require(table.size() == inst.atoms.size(), "lookup_table_policy: table size mismatch");
  return [atoms = inst.atoms, table](const Vec& h, Rng&) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < atoms.size(); ++s) {
      const double d = (atoms[s] - h).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = s;
      }
    }
    return table[best];
  };
}

int refined_levels(int levels) { return std::min(2 * levels, 64); }

VerifyOutcome run_verify(const VerifyConfig& cfg, const RecordSink& sink,
                         const TrainerState* initial) {
  const TinyInstance inst = build_tiny(cfg.tiny);
  const ProblemSpec& problem = inst.bundle.problem;
  VerifyOutcome out;
  out.coarse = brute_force_primal(problem, inst.atoms, inst.probabilities, inst.levels);
  out.fine = brute_force_primal(problem, inst.atoms, inst.probabilities,
                                power_grid(cfg.tiny.support, refined_levels(cfg.tiny.levels)));
  const double residual = std::max(0.0, out.fine.value - out.coarse.value);
  if (cfg.lookup_table) {
    Vec x = project_box(out.coarse.expected_f, problem.x_box);
    out.report = check_sandwich(inst, out.coarse, residual, lookup_table_policy(inst, out.coarse.policy),
                                x, out.coarse.lambda, cfg.sandwich);
    return out;
  }
  if (initial != nullptr) {
    out.state = *initial;
  } else {
    TrainResult tr = train(problem, inst.bundle.policy, cfg.trainer, sink);
    out.state = std::move(tr.state);
    out.log = std::move(tr.log);
  }
  out.report = check_sandwich(inst, out.coarse, residual, out.state, cfg.sandwich);
  return out;
}

}  // namespace pdlearn
