#include "pdlearn/run.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdlearn/policy_dist.hpp"

namespace pdlearn {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::awgn:
      return "awgn";
    case ProblemKind::interference_mac:
      return "interference-mac";
    case ProblemKind::interference_binary:
      return "interference-binary";
    case ProblemKind::toy:
      return "toy";
  }
  return "awgn";
}

ProblemKind parse_problem_kind(const std::string& s) {
  if (s == "awgn") return ProblemKind::awgn;
  if (s == "interference-mac" || s == "mac") return ProblemKind::interference_mac;
  if (s == "interference-binary" || s == "binary") return ProblemKind::interference_binary;
  if (s == "toy" || s == "tiny") return ProblemKind::toy;
  throw FormatError("unknown problem '" + s + "'");
}

void GridSpec::validate() const {
  require(std::isfinite(lower) && std::isfinite(upper) && lower > 0.0 && upper >= lower,
          "grid: need 0 < lower <= upper");
  require(points >= 1, "grid: need at least one point");
}

Vec GridSpec::values() const {
  validate();
  if (points == 1) return Vec::Constant(1, lower);
  return Vec::LinSpaced(points, lower, upper);
}

GridSpec parse_grid_spec(const std::string& s) {
  GridSpec g;
  std::istringstream is(s);
  char c1 = 0, c2 = 0;
  if (!(is >> g.lower >> c1 >> g.upper >> c2 >> g.points) || c1 != ':' || c2 != ':' ||
      !is.eof())
    throw FormatError("grid must look like lower:upper:points, got '" + s + "'");
  g.validate();
  return g;
}

std::string to_string(const GridSpec& grid) {
  auto text = [](double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  return text(grid.lower) + ':' + text(grid.upper) + ':' + std::to_string(grid.points);
}

void RunConfig::validate() const {
  require(users >= 1, "config: users must be positive");
  require(p_max > 0.0 && p0 > 0.0 && channel_rate > 0.0 && rate_cap > 0.0,
          "config: pmax, p0, channel-rate and rate-cap must be positive");
  require(support.lower >= 0.0 && support.lower < support.upper, "config: bad support");
  require(!hidden.empty(), "config: at least one hidden layer");
  for (int h : hidden) require(h >= 1, "config: hidden sizes must be positive");
  trainer.validate();
  if (grid) grid->validate();
  if (problem == ProblemKind::toy) tiny_config(*this).validate();
}

RunConfig defaults_for(ProblemKind kind) {
  RunConfig c;
  c.problem = kind;
  switch (kind) {
    case ProblemKind::awgn:
      c.hidden = {8, 4};
      break;
    case ProblemKind::interference_mac:
      c.hidden = {32, 16};
      break;
    case ProblemKind::interference_binary:
      c.users = 5;
      c.unit_constants = true;
      c.hidden = {32, 16};
      break;
    case ProblemKind::toy: {
      const TinyConfig t;
      c.users = t.users;
      c.p_max = t.p_max;
      c.unit_constants = true;
      c.support = t.support;
      c.rate_cap = t.rate_cap;
      c.hidden = t.hidden;
      c.states = t.states;
      c.levels = t.levels;
      break;
    }
  }
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  const TrainerConfig& t = c.trainer;
  nlohmann::json j;
  j["problem"] = to_string(c.problem);
  j["users"] = c.users;
  j["pmax"] = c.p_max;
  j["p0"] = c.p0;
  j["problem-seed"] = c.problem_seed;
  j["unit-constants"] = c.unit_constants;
  j["support-lower"] = c.support.lower;
  j["support-upper"] = c.support.upper;
  j["channel-rate"] = c.channel_rate;
  j["rate-cap"] = c.rate_cap;
  j["hidden"] = c.hidden;
  j["bias"] = c.bias;
  j["states"] = c.states;
  j["levels"] = c.levels;
  j["iters"] = t.iters;
  j["batch"] = t.batch;
  j["lr-theta"] = t.lr_theta;
  j["lr-x"] = t.lr_x;
  j["lr-lambda"] = t.lr_lambda;
  j["lr-mu"] = t.lr_mu;
  j["dual-decay"] = t.dual_decay;
  j["adam-beta1"] = t.adam_beta1;
  j["adam-beta2"] = t.adam_beta2;
  j["adam-eps"] = t.adam_eps;
  j["estimator"] = to_string(t.estimator);
  j["fd-alpha1"] = t.fd.alpha1;
  j["fd-alpha2"] = t.fd.alpha2;
  j["fd-alpha3"] = t.fd.alpha3;
  j["seed"] = t.seed;
  j["output"] = c.output_dir;
  j["grid"] = c.grid ? nlohmann::json(to_string(*c.grid)) : nlohmann::json(nullptr);
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c = defaults_for(parse_problem_kind(j.at("problem").get<std::string>()));
    TrainerConfig& t = c.trainer;
    c.users = j.at("users").get<int>();
    c.p_max = j.at("pmax").get<double>();
    c.p0 = j.at("p0").get<double>();
    c.problem_seed = j.at("problem-seed").get<std::uint64_t>();
    c.unit_constants = j.at("unit-constants").get<bool>();
    c.support.lower = j.at("support-lower").get<double>();
    c.support.upper = j.at("support-upper").get<double>();
    c.channel_rate = j.at("channel-rate").get<double>();
    c.rate_cap = j.at("rate-cap").get<double>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.bias = j.at("bias").get<bool>();
    c.states = j.at("states").get<int>();
    c.levels = j.at("levels").get<int>();
    t.iters = j.at("iters").get<int>();
    t.batch = j.at("batch").get<int>();
    t.lr_theta = j.at("lr-theta").get<double>();
    t.lr_x = j.at("lr-x").get<double>();
    t.lr_lambda = j.at("lr-lambda").get<double>();
    t.lr_mu = j.at("lr-mu").get<double>();
    t.dual_decay = j.at("dual-decay").get<double>();
    t.adam_beta1 = j.at("adam-beta1").get<double>();
    t.adam_beta2 = j.at("adam-beta2").get<double>();
    t.adam_eps = j.at("adam-eps").get<double>();
    t.estimator = parse_estimator_kind(j.at("estimator").get<std::string>());
    t.fd.alpha1 = j.at("fd-alpha1").get<double>();
    t.fd.alpha2 = j.at("fd-alpha2").get<double>();
    t.fd.alpha3 = j.at("fd-alpha3").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output").get<std::string>();
    if (!j.at("grid").is_null()) c.grid = parse_grid_spec(j.at("grid").get<std::string>());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run config: ") + e.what());
  }
}

namespace {

std::pair<Vec, Vec> constants(const RunConfig& c) {
  if (c.unit_constants) return {Vec::Ones(c.users), Vec::Ones(c.users)};
  const AwgnConfig drawn = make_awgn_config(c.users, c.p_max, c.problem_seed);
  return {drawn.weights, drawn.noises};
}

}  // namespace

AwgnConfig awgn_config(const RunConfig& c) {
  require(c.problem == ProblemKind::awgn, "awgn_config: problem is not awgn");
  AwgnConfig a = make_awgn_config(c.users, c.p_max, c.problem_seed);
  std::tie(a.weights, a.noises) = constants(c);
  a.support = c.support;
  a.channel_rate = c.channel_rate;
  a.rate_cap = c.rate_cap;
  a.hidden = c.hidden;
  a.bias = c.bias;
  return a;
}

InterferenceConfig interference_config(const RunConfig& c) {
  require(c.problem == ProblemKind::interference_mac || c.problem == ProblemKind::interference_binary,
          "interference_config: problem is not an interference problem");
  const InterferenceMode mode = c.problem == ProblemKind::interference_mac
                                    ? InterferenceMode::continuous_mac
                                    : InterferenceMode::binary_pairs;
  InterferenceConfig ic = make_interference_config(c.users, c.p_max, mode, c.problem_seed);
  std::tie(ic.weights, ic.noises) = constants(c);
  ic.p0 = c.p0;
  ic.support = c.support;
  ic.channel_rate = c.channel_rate;
  ic.rate_cap = c.rate_cap;
  ic.hidden = c.hidden;
  ic.bias = c.bias;
  return ic;
}

TinyConfig tiny_config(const RunConfig& c) {
  require(c.problem == ProblemKind::toy, "tiny_config: problem is not toy");
  TinyConfig t;
  t.users = c.users;
  t.states = c.states;
  t.levels = c.levels;
  t.p_max = c.p_max;
  t.channel_rate = c.channel_rate;
  t.support = c.support;
  t.rate_cap = c.rate_cap;
  t.hidden = c.hidden;
  t.bias = c.bias;
  return t;
}

ProblemBundle build_problem(const RunConfig& c) {
  switch (c.problem) {
    case ProblemKind::awgn:
      return build_awgn(awgn_config(c));
    case ProblemKind::interference_mac:
    case ProblemKind::interference_binary:
      return build_interference(interference_config(c));
    case ProblemKind::toy:
      return build_tiny(tiny_config(c)).bundle;
  }
  throw ContractViolation("build_problem: unknown problem");
}

nlohmann::json run_header(const RunConfig& c, const std::string& artifact) {
  nlohmann::json h;
  h["format"] = "pdlearn-" + artifact;
  h["version"] = 1;
  h["config"] = to_json(c);
  if (c.problem != ProblemKind::toy) {
    const auto [w, v] = constants(c);
    h["weights"] = std::vector<double>(w.data(), w.data() + w.size());
    h["noises"] = std::vector<double>(v.data(), v.data() + v.size());
  }
  return h;
}

std::vector<PolicyGridRow> tabulate_policy(const StochasticPolicy& policy, const Vec& theta,
                                           const GridSpec& grid, double channel_mean) {
  require(theta.size() == policy.num_params(), "tabulate_policy: theta has wrong size");
  require(channel_mean > 0.0, "tabulate_policy: channel mean must be positive");
  const Vec hs = grid.values();
  const int m = policy.num_users();
  const int n = policy.input_dim();
  const bool gaussian = policy.head() == OutputHead::truncated_gaussian;
  const bool pairs = n == m * m && m > 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PolicyGridRow> rows;
  rows.reserve(static_cast<std::size_t>(m) * hs.size());
  for (int i = 0; i < m; ++i) {
    // Own channel: h_i, or the direct gain G(i, i) for the pairs layout.
    const int own = pairs ? i + i * m : i;
    for (Eigen::Index k = 0; k < hs.size(); ++k) {
      Vec h = Vec::Constant(n, channel_mean);
      h(own) = hs(k);
      const Vec d = policy.distribution(theta, h);
      PolicyGridRow r;
      r.user = i;
      r.h = hs(k);
      if (gaussian) {
        r.mu = d(2 * i);
        r.sigma = d(2 * i + 1);
        r.prob = nan;
        r.mean_action = truncnorm_moments(r.mu, r.sigma, policy.support().lower,
                                          policy.support().upper)
                            .first;
      } else {
        r.mu = nan;
        r.sigma = nan;
        r.prob = d(i);
        r.mean_action = d(i);
      }
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace pdlearn
