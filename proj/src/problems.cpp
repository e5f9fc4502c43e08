#include "pdlearn/problems.hpp"

#include <cmath>
#include <tuple>

namespace pdlearn {

namespace {

void validate_common(int m, const Vec& weights, const Vec& noises, double p_max,
                     const Support& support, double channel_rate, double rate_cap) {
  require(m >= 1, "problem: user count must be positive");
  require(weights.size() == m && noises.size() == m, "problem: weights/noises must have m entries");
  require((weights.array() > 0.0).all(), "problem: weights must be positive");
  require((noises.array() > 0.0).all(), "problem: noises must be positive");
  require(p_max > 0.0, "problem: p_max must be positive");
  require(support.lower >= 0.0 && support.lower < support.upper, "problem: bad power support");
  require(channel_rate > 0.0, "problem: channel rate must be positive");
  require(rate_cap > 0.0, "problem: rate cap must be positive");
}

// X = [0, rate_cap]^m x {0}; the last coordinate pairs with the budget row.
Box rates_and_budget_box(int m, double rate_cap) {
  Box box{Vec::Zero(m + 1), Vec::Constant(m + 1, rate_cap)};
  box.upper(m) = 0.0;
  return box;
}

UtilityFn weighted_sum(const Vec& weights) {
  return [w = weights](const Vec& x) { return w.dot(x.head(w.size())); };
}

std::pair<Vec, Vec> uniform_constants(int m, std::uint64_t seed) {
  Rng rng = make_stream(seed, "problem-constants");
  Vec w(m), v(m);
  for (int i = 0; i < m; ++i) w(i) = 0.5 + uniform_open(rng);
  for (int i = 0; i < m; ++i) v(i) = 0.5 + uniform_open(rng);
  return {w, v};
}

}  // namespace

void AwgnConfig::validate() const {
  validate_common(m, weights, noises, p_max, support, channel_rate, rate_cap);
}

std::string to_string(InterferenceMode mode) {
  return mode == InterferenceMode::continuous_mac ? "mac" : "binary";
}

InterferenceMode parse_interference_mode(const std::string& s) {
  if (s == "mac" || s == "continuous-mac") return InterferenceMode::continuous_mac;
  if (s == "binary" || s == "binary-pairs") return InterferenceMode::binary_pairs;
  throw FormatError("unknown interference mode '" + s + "'");
}

void InterferenceConfig::validate() const {
  validate_common(m, weights, noises, p_max, support, channel_rate, rate_cap);
  if (mode == InterferenceMode::binary_pairs) require(p0 > 0.0, "interference: p0 must be positive");
}

int InterferenceConfig::channel_dim() const {
  return mode == InterferenceMode::continuous_mac ? m : m * m;
}

AwgnConfig make_awgn_config(int m, double p_max, std::uint64_t seed) {
  AwgnConfig cfg;
  cfg.m = m;
  cfg.p_max = p_max;
  std::tie(cfg.weights, cfg.noises) = uniform_constants(m, seed);
  return cfg;
}

InterferenceConfig make_interference_config(int m, double p_max, InterferenceMode mode,
                                            std::uint64_t seed) {
  InterferenceConfig cfg;
  cfg.m = m;
  cfg.p_max = p_max;
  cfg.mode = mode;
  std::tie(cfg.weights, cfg.noises) = uniform_constants(m, seed);
  return cfg;
}

Vec awgn_rates(const Vec& p, const Vec& h, const Vec& noises) {
  require(p.size() == h.size() && p.size() == noises.size(), "awgn_rates: size mismatch");
  return (h.cwiseProduct(p).cwiseQuotient(noises)).array().log1p().matrix();
}

Vec mac_rates(const Vec& p, const Vec& h, const Vec& noises) {
  require(p.size() == h.size() && p.size() == noises.size(), "mac_rates: size mismatch");
  const Vec signal = h.cwiseProduct(p);
  const double total = signal.sum();
  Vec rates(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double interference = std::max(0.0, total - signal(i));
    rates(i) = std::log1p(signal(i) / (noises(i) + interference));
  }
  return rates;
}

Vec pair_rates(const Vec& alpha, const Mat& gains, const Vec& noises, double p0) {
  const Eigen::Index m = alpha.size();
  require(gains.rows() == m && gains.cols() == m && noises.size() == m,
          "pair_rates: size mismatch");
  const Vec s = p0 * alpha;
  const Vec received = gains * s;  // row i: sum_j G_ij s_j
  Vec rates(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double signal = gains(i, i) * s(i);
    const double interference = std::max(0.0, received(i) - signal);
    rates(i) = std::log1p(signal / (noises(i) + interference));
  }
  return rates;
}

Mat gains_matrix(const Vec& h, int m) {
  require(h.size() == static_cast<Eigen::Index>(m) * m, "gains_matrix: expected m*m entries");
  return Eigen::Map<const Mat>(h.data(), m, m);
}

ProblemBundle build_awgn(const AwgnConfig& cfg) {
  cfg.validate();
  const int m = cfg.m;
  ProblemSpec p;
  p.n_channels = m;
  p.m_resources = m;
  p.u_metrics = m + 1;
  p.r_utilities = 0;
  p.f = [v = cfg.noises, p_max = cfg.p_max](const Vec& alloc, const Vec& h) {
    Vec out(alloc.size() + 1);
    out.head(alloc.size()) = awgn_rates(alloc, h, v);
    out(alloc.size()) = p_max - alloc.sum();
    return out;
  };
  p.g0 = weighted_sum(cfg.weights);
  p.x_box = rates_and_budget_box(m, cfg.rate_cap);
  p.p_box = Box{Vec::Constant(m, cfg.support.lower), Vec::Constant(m, cfg.support.upper)};
  p.sampler = ChannelSampler::exponential(m, cfg.channel_rate);
  p.budget_row = m;
  p.validate();

  const auto arch =
      MlpArchitecture::feedforward(1, cfg.hidden, 2, OutputHead::truncated_gaussian, cfg.bias);
  return {std::move(p), StochasticPolicy(arch, cfg.support, m, PolicyLayout::per_user)};
}

ProblemBundle build_interference(const InterferenceConfig& cfg) {
  cfg.validate();
  const int m = cfg.m;
  const bool binary = cfg.mode == InterferenceMode::binary_pairs;
  ProblemSpec p;
  p.n_channels = cfg.channel_dim();
  p.m_resources = m;
  p.u_metrics = m + 1;
  p.r_utilities = 0;
  if (binary) {
    p.f = [v = cfg.noises, p_max = cfg.p_max, p0 = cfg.p0, m](const Vec& alpha, const Vec& h) {
      require(((alpha.array() == 0.0) || (alpha.array() == 1.0)).all(),
              "binary interference: allocation must be 0/1");
      Vec out(m + 1);
      out.head(m) = pair_rates(alpha, gains_matrix(h, m), v, p0);
      out(m) = p_max - alpha.sum();
      return out;
    };
  } else {
    p.f = [v = cfg.noises, p_max = cfg.p_max, m](const Vec& alloc, const Vec& h) {
      Vec out(m + 1);
      out.head(m) = mac_rates(alloc, h, v);
      out(m) = p_max - alloc.sum();
      return out;
    };
  }
  p.g0 = weighted_sum(cfg.weights);
  p.x_box = rates_and_budget_box(m, cfg.rate_cap);
  if (binary) {
    p.p_box = Box{Vec::Zero(m), Vec::Ones(m)};
    p.binary_allocation = true;
  } else {
    p.p_box = Box{Vec::Constant(m, cfg.support.lower), Vec::Constant(m, cfg.support.upper)};
  }
  p.sampler = ChannelSampler::exponential(p.n_channels, cfg.channel_rate);
  p.budget_row = m;
  p.validate();

  const OutputHead head = binary ? OutputHead::bernoulli : OutputHead::truncated_gaussian;
  const int out = binary ? m : 2 * m;
  const auto arch = MlpArchitecture::feedforward(p.n_channels, cfg.hidden, out, head, cfg.bias);
  return {std::move(p), StochasticPolicy(arch, cfg.support, m, PolicyLayout::joint)};
}

Mat sample_channels(const ChannelSampler& sampler, int batch, Rng& rng) {
  require(batch >= 1, "sample_channels: batch must be >= 1");
  return sampler.draw_batch(rng, batch);
}

}  // namespace pdlearn
