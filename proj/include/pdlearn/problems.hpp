#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/mlp.hpp"
#include "pdlearn/policy.hpp"
#include "pdlearn/problem.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

/// Weighted sum capacity over m parallel AWGN links under an average total
/// power budget. Ergodic metrics are the m rates plus a budget row
/// p_max - sum(p) whose x-component is pinned to 0.
struct AwgnConfig {
  int m = 20;
  Vec weights;  // w_i > 0
  Vec noises;   // v_i > 0
  double p_max = 20.0;
  Support support;            // per-user instantaneous power range
  double channel_rate = 2.0;  // h_i ~ Exp(rate)
  double rate_cap = 1.0;      // upper end of the rate coordinates of X
  std::vector<int> hidden = {8, 4};
  bool bias = true;

  void validate() const;
};

enum class InterferenceMode {
  continuous_mac,  // shared receiver, per-user scalar gains, truncated-Gaussian powers
  binary_pairs,    // m transmitter/receiver pairs, full gain matrix, on/off at power p0
};

std::string to_string(InterferenceMode mode);
InterferenceMode parse_interference_mode(const std::string& s);

struct InterferenceConfig {
  int m = 20;
  Vec weights;
  Vec noises;
  double p_max = 20.0;
  InterferenceMode mode = InterferenceMode::continuous_mac;
  double p0 = 10.0;  // transmit power of an active pair (binary mode)
  Support support;
  double channel_rate = 2.0;
  double rate_cap = 1.0;
  std::vector<int> hidden = {32, 16};
  bool bias = true;

  void validate() const;
  /// Channel dimension: m (MAC) or m*m (pairs).
  int channel_dim() const;
};

/// A problem together with the policy family that is trained on it.
struct ProblemBundle {
  ProblemSpec problem;
  StochasticPolicy policy;
};

/// w_i, v_i ~ U[0.5, 1.5] from a stream derived from `seed`.
AwgnConfig make_awgn_config(int m, double p_max, std::uint64_t seed);
InterferenceConfig make_interference_config(int m, double p_max, InterferenceMode mode,
                                            std::uint64_t seed);

// Capacity functions. All return one rate per user, in nats.

/// log(1 + h_i p_i / v_i).
Vec awgn_rates(const Vec& p, const Vec& h, const Vec& noises);
/// log(1 + h_i p_i / (v_i + sum_{j != i} h_j p_j)), common receiver.
Vec mac_rates(const Vec& p, const Vec& h, const Vec& noises);
/// Pairs with gain matrix G(i, j) from transmitter j to receiver i:
/// log(1 + G_ii s_i / (v_i + sum_{j != i} G_ij s_j)) with s = p0 * alpha.
/// Accepts alpha in [0, 1] so relaxed allocations can be scored.
Vec pair_rates(const Vec& alpha, const Mat& gains, const Vec& noises, double p0);

/// Column-major m x m view of a pairs channel vector.
Mat gains_matrix(const Vec& h, int m);

ProblemBundle build_awgn(const AwgnConfig& cfg);
ProblemBundle build_interference(const InterferenceConfig& cfg);

/// Batch of i.i.d. Exp(rate) channel vectors, dim x batch.
Mat sample_channels(const ChannelSampler& sampler, int batch, Rng& rng);

}  // namespace pdlearn
