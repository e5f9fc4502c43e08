#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pdlearn/baselines.hpp"
#include "pdlearn/io.hpp"
#include "pdlearn/oracle.hpp"
#include "pdlearn/run.hpp"
#include "pdlearn/trainer.hpp"

namespace fs = std::filesystem;
using namespace pdlearn;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerifyFailed = 3;

// Options shared by every subcommand. Each value is applied only when it was
// given on the command line or in the config file, so that problem-specific
// defaults survive.
struct RunOptions {
  std::string problem = "awgn";
  int users = 0;
  double p_max = 0, p0 = 0;
  std::uint64_t problem_seed = 0;
  bool unit_constants = false;
  double support_lower = 0, support_upper = 0, channel_rate = 0, rate_cap = 0;
  std::vector<int> hidden;
  bool bias = true;
  int states = 0, levels = 0;
  int iters = 0, batch = 0;
  double lr = 0, lr_theta = 0, lr_x = 0, lr_lambda = 0, lr_mu = 0, dual_decay = 0;
  double beta1 = 0, beta2 = 0, adam_eps = 0;
  std::string estimator;
  double fd1 = 0, fd2 = 0, fd3 = 0;
  std::uint64_t seed = 0;
  std::string output;
  std::string grid;
  bool wall_time = false;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;
  CLI::Option* problem_opt = nullptr;
  CLI::Option* lr_opt = nullptr;

  template <class T>
  void add(CLI::App* app, const std::string& name, T& var, const std::string& help,
           std::function<void(RunConfig&)> apply) {
    setters.emplace_back(app->add_option(name, var, help), std::move(apply));
  }

  void attach(CLI::App* app) {
    problem_opt = app->add_option("--problem", problem,
                                  "awgn | interference-mac | interference-binary | toy");
    add(app, "--users", users, "number of users m", [this](RunConfig& c) { c.users = users; });
    add(app, "--pmax", p_max, "average power budget", [this](RunConfig& c) { c.p_max = p_max; });
    add(app, "--p0", p0, "transmit power of an active pair (binary)",
        [this](RunConfig& c) { c.p0 = p0; });
    add(app, "--problem-seed", problem_seed, "seed of the weight and noise draws",
        [this](RunConfig& c) { c.problem_seed = problem_seed; });
    setters.emplace_back(
        app->add_flag("--unit-constants,!--random-constants", unit_constants,
                      "use w = v = 1 instead of random weights and noises"),
        [this](RunConfig& c) { c.unit_constants = unit_constants; });
    add(app, "--support-lower", support_lower, "lower end of the per-user power range",
        [this](RunConfig& c) { c.support.lower = support_lower; });
    add(app, "--support-upper", support_upper, "upper end of the per-user power range",
        [this](RunConfig& c) { c.support.upper = support_upper; });
    add(app, "--channel-rate", channel_rate, "rate of the exponential channel law",
        [this](RunConfig& c) { c.channel_rate = channel_rate; });
    add(app, "--rate-cap", rate_cap, "upper end of the rate coordinates of x",
        [this](RunConfig& c) { c.rate_cap = rate_cap; });
    setters.emplace_back(app->add_option("--hidden", hidden, "hidden layer widths")->delimiter(','),
                         [this](RunConfig& c) { c.hidden = hidden; });
    setters.emplace_back(app->add_flag("--bias,!--no-bias", bias, "bias terms in the network"),
                         [this](RunConfig& c) { c.bias = bias; });
    add(app, "--states", states, "atoms of the toy channel law",
        [this](RunConfig& c) { c.states = states; });
    add(app, "--levels", levels, "power grid levels of the toy oracle",
        [this](RunConfig& c) { c.levels = levels; });
    add(app, "--iters", iters, "training iterations",
        [this](RunConfig& c) { c.trainer.iters = iters; });
    add(app, "--batch", batch, "channel draws per iteration", [this](RunConfig& c) {
      c.trainer.batch = batch;
      c.trainer.fd.batch = batch;
    });
    lr_opt = app->add_option("--lr", lr, "sets all four learning rates");
    add(app, "--lr-theta", lr_theta, "ADAM rate of the policy parameters",
        [this](RunConfig& c) { c.trainer.lr_theta = lr_theta; });
    add(app, "--lr-x", lr_x, "step of the x ascent", [this](RunConfig& c) { c.trainer.lr_x = lr_x; });
    add(app, "--lr-lambda", lr_lambda, "initial step of the lambda descent",
        [this](RunConfig& c) { c.trainer.lr_lambda = lr_lambda; });
    add(app, "--lr-mu", lr_mu, "initial step of the mu descent",
        [this](RunConfig& c) { c.trainer.lr_mu = lr_mu; });
    add(app, "--dual-decay", dual_decay, "per-iteration decay of the dual steps",
        [this](RunConfig& c) { c.trainer.dual_decay = dual_decay; });
    add(app, "--adam-beta1", beta1, "ADAM first-moment decay", [this](RunConfig& c) { c.trainer.adam_beta1 = beta1; });
    add(app, "--adam-beta2", beta2, "ADAM second-moment decay", [this](RunConfig& c) { c.trainer.adam_beta2 = beta2; });
    add(app, "--adam-eps", adam_eps, "ADAM denominator offset", [this](RunConfig& c) { c.trainer.adam_eps = adam_eps; });
    add(app, "--estimator", estimator, "policy-gradient | finite-difference",
        [this](RunConfig& c) { c.trainer.estimator = parse_estimator_kind(estimator); });
    add(app, "--fd-alpha1", fd1, "finite-difference step for g0",
        [this](RunConfig& c) { c.trainer.fd.alpha1 = fd1; });
    add(app, "--fd-alpha2", fd2, "finite-difference step for the policy parameters",
        [this](RunConfig& c) { c.trainer.fd.alpha2 = fd2; });
    add(app, "--fd-alpha3", fd3, "finite-difference step for g",
        [this](RunConfig& c) { c.trainer.fd.alpha3 = fd3; });
    add(app, "--seed", seed, "run seed", [this](RunConfig& c) { c.trainer.seed = seed; });
    add(app, "--output", output, "output directory",
        [this](RunConfig& c) { c.output_dir = output; });
    add(app, "--grid", grid, "policy table grid lower:upper:points",
        [this](RunConfig& c) { c.grid = parse_grid_spec(grid); });
    app->add_flag("--with-wall-time", wall_time, "record wall_ms in metrics.jsonl");
  }

  RunConfig resolve(const std::string& command) const {
    RunConfig c = defaults_for(parse_problem_kind(problem));
    if (*lr_opt) {
      c.trainer.lr_theta = c.trainer.lr_x = c.trainer.lr_lambda = c.trainer.lr_mu = lr;
    }
    for (const auto& [opt, apply] : setters)
      if (*opt) apply(c);
    if (c.output_dir.empty()) {
      const char* root = std::getenv("PDLEARN_OUTPUT_ROOT");
      const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
      c.output_dir = (base / (command + "-" + to_string(c.problem) + "-seed" +
                              std::to_string(c.trainer.seed)))
                         .string();
    }
    c.validate();
    return c;
  }
};

fs::path prepare_output(const RunConfig& c) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  return dir;
}

std::vector<std::string> checkpoint_comments(const RunConfig& c) {
  return {run_header(c, "checkpoint").dump()};
}

void save_checkpoint(const fs::path& dir, const RunConfig& c, const StochasticPolicy& policy,
                     const TrainerState& state) {
  policy.save((dir / "checkpoint.txt").string(), state.theta, checkpoint_comments(c));
  save_trainer_state((dir / "checkpoint.state").string(), state, checkpoint_comments(c));
}

double channel_mean(const RunConfig& c) { return 1.0 / c.channel_rate; }

void dump_grid(const fs::path& dir, const RunConfig& c, const StochasticPolicy& policy,
               const Vec& theta, const GridSpec& grid) {
  nlohmann::json header = run_header(c, "policy-grid");
  header["grid"] = to_string(grid);
  header["channel_mean"] = channel_mean(c);
  write_policy_grid((dir / "policy_grid.csv").string(), header,
                    tabulate_policy(policy, theta, grid, channel_mean(c)));
}

struct Checkpoint {
  RunConfig config;
  StochasticPolicy policy;
  TrainerState state;
};

// Reads the run config from the leading comment of checkpoint.txt, the
// policy from its body and the sidecar state from checkpoint.state.
Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path model = dir / "checkpoint.txt";
  std::ifstream is(model);
  if (!is) throw FormatError("cannot open checkpoint '" + model.string() + "'");
  std::string first;
  std::getline(is, first);
  if (first.rfind("# ", 0) != 0) throw FormatError("checkpoint: missing config header line");
  RunConfig cfg;
  try {
    const auto header = nlohmann::json::parse(first.substr(2));
    if (header.at("format") != "pdlearn-checkpoint")
      throw FormatError("checkpoint: unexpected header format");
    cfg = run_config_from_json(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  auto [policy, theta] = StochasticPolicy::load(model.string());
  TrainerState state = load_trainer_state((dir / "checkpoint.state").string());
  state.theta = std::move(theta);
  return {std::move(cfg), std::move(policy), std::move(state)};
}

void require_compatible(const StochasticPolicy& expected, const StochasticPolicy& loaded,
                        const TrainerState& state, const ProblemSpec& problem) {
  if (expected.num_params() != loaded.num_params() ||
      expected.input_dim() != loaded.input_dim() || expected.num_users() != loaded.num_users())
    throw FormatError("checkpoint: policy does not match the configured problem");
  if (state.x.size() != problem.u_metrics || state.duals.lambda.size() != problem.u_metrics ||
      state.duals.mu.size() != problem.r_utilities ||
      state.adam_m.size() != loaded.num_params() || state.adam_v.size() != loaded.num_params())
    throw FormatError("checkpoint: trainer state does not match the configured problem");
}

int cmd_train(const RunOptions& o) {
  const RunConfig c = o.resolve("train");
  const fs::path dir = prepare_output(c);
  const ProblemBundle b = build_problem(c);
  MetricsWriter metrics((dir / "metrics.jsonl").string(), run_header(c, "metrics"), o.wall_time);
  TrainResult res;
  try {
    res = train(b.problem, b.policy, c.trainer,
                [&](const MetricRecord& r) { metrics.write(r); });
  } catch (const TrainingAborted& e) {
    metrics.write_abort(e.what(), e.record);
    save_checkpoint(dir, c, b.policy, e.last_good);
    std::cerr << "pdlearn train: " << e.what() << " (partial artifacts in " << dir.string()
              << ")\n";
    return kExitNumeric;
  }
  save_checkpoint(dir, c, b.policy, res.state);
  if (c.grid) dump_grid(dir, c, b.policy, res.state.theta, *c.grid);
  if (!res.log.empty()) {
    const TailSummary tail = summarize_tail(res.log);
    std::cout << "iterations " << res.state.k << "  tail g0(x) " << tail.mean_objective_g0x
              << "  tail utility " << tail.mean_realized_utility << "\n";
  }
  std::cout << "artifacts in " << dir.string() << "\n";
  return 0;
}

struct BaselineOptions {
  std::string name;
  int k = 0;
  double power = 0;
  int eval_batch = 0;
  int sgd_iters = 20000;
  CLI::Option* k_opt = nullptr;
  CLI::Option* power_opt = nullptr;
  CLI::Option* batch_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--name", name, "exact-dual-sgd | equal-power | random-k | wmmse")
        ->required()
        ->check(CLI::IsMember({"exact-dual-sgd", "equal-power", "random-k", "wmmse"}));
    k_opt = app->add_option("--k", k, "active users of random-k");
    power_opt = app->add_option("--power", power, "power of each active user in random-k");
    batch_opt = app->add_option("--eval-batch", eval_batch, "evaluation draws");
    app->add_option("--sgd-iters", sgd_iters, "iterations of the exact dual SGD");
  }
};

int cmd_baseline(const RunOptions& o, const BaselineOptions& bo) {
  const RunConfig c = o.resolve("baseline-" + bo.name);
  const ProblemBundle b = build_problem(c);
  const int m = c.users;
  const bool binary = c.problem == ProblemKind::interference_binary;
  int eval_batch = bo.name == "wmmse" ? 5000 : 100000;
  if (*bo.batch_opt) eval_batch = bo.eval_batch;
  require(eval_batch >= 2, "baseline: eval batch must be at least 2");

  ProblemSpec scoring = b.problem;
  AllocationFn policy;
  double price = std::numeric_limits<double>::quiet_NaN();
  nlohmann::json params;
  if (bo.name == "exact-dual-sgd") {
    if (c.problem != ProblemKind::awgn)
      throw ContractViolation("baseline exact-dual-sgd applies to the awgn problem only");
    DualSgdConfig sgd;
    sgd.iters = bo.sgd_iters;
    const AwgnDualResult r = exact_awgn_dual_sgd(awgn_config(c), sgd, c.trainer.seed);
    policy = r.policy;
    price = r.mu;
    params["sgd-iters"] = sgd.iters;
  } else if (bo.name == "equal-power") {
    if (binary || c.problem == ProblemKind::toy)
      throw ContractViolation("baseline equal-power needs the awgn or interference-mac problem");
    policy = equal_power_policy(m, c.p_max);
  } else if (bo.name == "random-k") {
    if (c.problem == ProblemKind::toy)
      throw ContractViolation("baseline random-k needs a multi-user problem");
    const int k = *bo.k_opt ? bo.k : (binary ? 2 : std::min(m, 4));
    require(k >= 1 && k <= m, "baseline random-k: need 1 <= k <= users");
    // Binary allocations are on/off, so the active level is 1.
    const double power = binary ? 1.0 : (*bo.power_opt ? bo.power : c.p_max / k);
    if (binary && *bo.power_opt && bo.power != 1.0)
      throw ContractViolation("baseline random-k: binary allocations only take power 1");
    policy = random_k_policy(m, k, power);
    params["k"] = k;
    params["power"] = power;
  } else {
    if (c.problem != ProblemKind::interference_mac && !binary)
      throw ContractViolation("baseline wmmse applies to interference problems only");
    const InterferenceConfig ic = interference_config(c);
    policy = wmmse_policy(ic);
    if (binary) scoring = relaxed_pairs_problem(ic);
  }
  params["eval-batch"] = eval_batch;

  const PolicyEvaluation ev = evaluate_policy(scoring, policy, eval_batch, c.trainer.seed);
  const fs::path dir = prepare_output(c);
  nlohmann::json header = run_header(c, "summary");
  header["baseline"] = bo.name;
  header["baseline_params"] = params;
  CsvWriter csv((dir / "summary.csv").string(), header,
                {"baseline", "problem", "objective", "objective_se", "power_residual",
                 "violation_norm", "min_draw_power", "max_draw_power", "power_price", "samples"});
  csv.row({bo.name, to_string(c.problem), format_double(ev.objective),
           format_double(ev.objective_se), format_double(ev.power_residual),
           format_double(ev.violation_norm), format_double(ev.min_draw_power),
           format_double(ev.max_draw_power), format_double(price), std::to_string(ev.samples)});
  std::cout << bo.name << " objective " << ev.objective << " (se " << ev.objective_se
            << ")  power residual " << ev.power_residual << "\n";
  return 0;
}

struct VerifyOptions {
  bool lookup_table = false;
  std::string checkpoint;
  int samples_per_atom = 0;
  int lipschitz_pairs = 0;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* pairs_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_flag("--lookup-table", lookup_table, "score the oracle lookup table");
    app->add_option("--checkpoint", checkpoint, "train output directory to verify");
    samples_opt = app->add_option("--samples-per-atom", samples_per_atom, "draws per atom");
    pairs_opt = app->add_option("--lipschitz-pairs", lipschitz_pairs, "pairs for the L estimate");
  }
};

int cmd_verify(RunOptions& o, const VerifyOptions& vo) {
  if (*o.problem_opt && parse_problem_kind(o.problem) != ProblemKind::toy)
    throw ContractViolation("verify runs on the toy problem only");
  o.problem = "toy";
  const RunConfig c = o.resolve("verify");
  VerifyConfig vc;
  vc.tiny = tiny_config(c);
  vc.trainer = c.trainer;
  vc.sandwich.seed = c.trainer.seed;
  if (*vo.samples_opt) vc.sandwich.samples_per_atom = vo.samples_per_atom;
  if (*vo.pairs_opt) vc.sandwich.lipschitz_pairs = vo.lipschitz_pairs;
  vc.sandwich.validate();
  vc.lookup_table = vo.lookup_table;

  std::optional<TrainerState> initial;
  if (!vo.checkpoint.empty()) {
    if (vo.lookup_table) throw ContractViolation("--checkpoint and --lookup-table exclude each other");
    Checkpoint cp = load_checkpoint(vo.checkpoint);
    const TinyInstance inst = build_tiny(vc.tiny);
    require_compatible(inst.bundle.policy, cp.policy, cp.state, inst.bundle.problem);
    initial = std::move(cp.state);
  }

  const fs::path dir = prepare_output(c);
  std::unique_ptr<MetricsWriter> metrics;
  if (!vo.lookup_table && !initial)
    metrics = std::make_unique<MetricsWriter>((dir / "metrics.jsonl").string(),
                                              run_header(c, "metrics"), o.wall_time);
  VerifyOutcome out;
  try {
    out = run_verify(
        vc, [&](const MetricRecord& r) { if (metrics) metrics->write(r); },
        initial ? &*initial : nullptr);
  } catch (const TrainingAborted& e) {
    if (metrics) metrics->write_abort(e.what(), e.record);
    std::cerr << "pdlearn verify: " << e.what() << "\n";
    return kExitNumeric;
  }
  nlohmann::json header = run_header(c, "report");
  header["mode"] = vo.lookup_table ? "lookup-table" : (initial ? "checkpoint" : "trained");
  if (initial) header["checkpoint"] = vo.checkpoint;
  append_report((dir / "report.jsonl").string(), header, out.report);
  const DualityGapReport& r = out.report;
  std::cout << "P* " << r.p_star_hat << "  D " << r.d_phi_hat << "  bounds [" << r.lower_bound
            << ", " << r.upper_bound << "]  " << (r.sandwich_ok ? "PASS" : "FAIL") << "\n";
  return r.sandwich_ok ? 0 : kExitVerifyFailed;
}

struct DumpOptions {
  std::string checkpoint;
  std::string grid;
  std::string output;

  void attach(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "train output directory")->required();
    app->add_option("--grid", grid, "lower:upper:points (default 0.05:2:40)");
    app->add_option("--output", output, "directory for policy_grid.csv (default: checkpoint dir)");
  }
};

int cmd_dump_policy(const DumpOptions& d) {
  Checkpoint cp = load_checkpoint(d.checkpoint);
  const GridSpec grid = !d.grid.empty() ? parse_grid_spec(d.grid) : cp.config.grid.value_or(GridSpec{});
  const fs::path dir = d.output.empty() ? fs::path(d.checkpoint) : fs::path(d.output);
  RunConfig c = cp.config;
  c.output_dir = dir.string();
  prepare_output(c);
  dump_grid(dir, c, cp.policy, cp.state.theta, grid);
  std::cout << "wrote " << (dir / "policy_grid.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free primal-dual learning of resource allocation policies"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI file with [train], [baseline] and [verify] sections; flags win");
  app.allow_config_extras(false);
  app.fallthrough();

  RunOptions train_opts, baseline_opts, verify_opts;
  BaselineOptions baseline;
  VerifyOptions verify;
  DumpOptions dump;

  CLI::App* train_cmd = app.add_subcommand("train", "train a policy");
  train_opts.attach(train_cmd);
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "evaluate a reference allocation");
  baseline_opts.attach(baseline_cmd);
  baseline.attach(baseline_cmd);
  CLI::App* verify_cmd = app.add_subcommand("verify", "duality gap check on the toy instance");
  verify_opts.attach(verify_cmd);
  verify.attach(verify_cmd);
  CLI::App* dump_cmd = app.add_subcommand("dump-policy", "tabulate a trained policy");
  dump.attach(dump_cmd);

  for (CLI::App* sub : {train_cmd, baseline_cmd, verify_cmd, dump_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*baseline_cmd) return cmd_baseline(baseline_opts, baseline);
    if (*verify_cmd) return cmd_verify(verify_opts, verify);
    if (*dump_cmd) return cmd_dump_policy(dump);
  } catch (const NumericalFailure& e) {
    std::cerr << "pdlearn: numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "pdlearn: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
