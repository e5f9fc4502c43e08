#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdlearn/oracle.hpp"
#include "pdlearn/problems.hpp"
#include "pdlearn/trainer.hpp"

namespace pdlearn {

enum class ProblemKind { awgn, interference_mac, interference_binary, toy };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& s);

/// Channel values at which dump-policy tabulates the policy: `points`
/// values evenly spaced on [lower, upper].
struct GridSpec {
  double lower = 0.05;
  double upper = 2.0;
  int points = 40;

  void validate() const;
  Vec values() const;
};

/// Parses "lower:upper:points".
GridSpec parse_grid_spec(const std::string& s);
std::string to_string(const GridSpec& grid);

/// Everything needed to rebuild a run. Problem-dependent fields are filled
/// by defaults_for() and may then be overridden.
struct RunConfig {
  ProblemKind problem = ProblemKind::awgn;
  int users = 20;
  double p_max = 20.0;
  double p0 = 10.0;
  std::uint64_t problem_seed = 1234;  // draws the weights and noises
  bool unit_constants = false;        // w = v = 1 instead of random draws
  Support support;
  double channel_rate = 2.0;
  double rate_cap = 1.0;
  std::vector<int> hidden = {8, 4};
  bool bias = true;
  int states = 16;  // toy problem only
  int levels = 32;  // toy problem only
  TrainerConfig trainer;
  std::string output_dir;
  std::optional<GridSpec> grid;

  void validate() const;
};

RunConfig defaults_for(ProblemKind kind);

/// Flat object whose keys match the command-line option names.
nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

AwgnConfig awgn_config(const RunConfig& cfg);
InterferenceConfig interference_config(const RunConfig& cfg);
TinyConfig tiny_config(const RunConfig& cfg);

/// Problem plus policy family for any problem kind.
ProblemBundle build_problem(const RunConfig& cfg);

/// Resolved config plus the drawn weights and noises; written at the top of
/// every artifact.
nlohmann::json run_header(const RunConfig& cfg, const std::string& artifact);

/// One row of a policy table: the law of user `user` when its own channel
/// equals h and every other channel entry sits at the channel mean.
struct PolicyGridRow {
  int user = 0;
  double h = 0.0;
  double mu = 0.0;     // truncated Gaussian location, NaN for Bernoulli
  double sigma = 0.0;  // NaN for Bernoulli
  double prob = 0.0;   // Bernoulli probability, NaN for the truncated Gaussian
  double mean_action = 0.0;
};

std::vector<PolicyGridRow> tabulate_policy(const StochasticPolicy& policy, const Vec& theta,
                                           const GridSpec& grid, double channel_mean);

}  // namespace pdlearn
