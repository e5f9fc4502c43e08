#include "pdlearn/policy.hpp"

#include <fstream>
#include <optional>
#include <sstream>

namespace pdlearn {

std::string to_string(PolicyLayout layout) {
  return layout == PolicyLayout::per_user ? "per-user" : "joint";
}

PolicyLayout parse_policy_layout(const std::string& s) {
  if (s == "per-user") return PolicyLayout::per_user;
  if (s == "joint") return PolicyLayout::joint;
  throw FormatError("unknown policy layout '" + s + "'");
}

StochasticPolicy::StochasticPolicy(MlpArchitecture arch, Support support, int users,
                                   PolicyLayout layout)
    : arch_(std::move(arch)), support_(support), users_(users), layout_(layout) {
  arch_.validate();
  require(users_ > 0, "policy: user count must be positive");
  require(support_.lower < support_.upper, "policy: empty support");
  require(support_.lower >= 0.0, "policy: allocations must be nonnegative");
  require(arch_.head != OutputHead::raw, "policy: a distribution head is required");
  if (layout_ == PolicyLayout::per_user)
    require(arch_.input_dim() == 1 && arch_.output_dim() == params_per_user(),
            "policy: per-user networks map one channel to one user's parameters");
  else
    require(arch_.output_dim() == params_per_user() * users_,
            "policy: joint network output does not match the user count");
}

int StochasticPolicy::num_params() const { return num_networks() * net_params(); }

int StochasticPolicy::input_dim() const {
  return layout_ == PolicyLayout::per_user ? users_ : arch_.input_dim();
}

Vec StochasticPolicy::initial_theta(Rng& rng) const {
  Vec theta(num_params());
  for (int k = 0; k < num_networks(); ++k)
    theta.segment(static_cast<Eigen::Index>(k) * net_params(), net_params()) =
        initial_parameters(arch_, rng);
  return theta;
}

Mat StochasticPolicy::distribution_batch(const Vec& theta, const Mat& H) const {
  require(theta.size() == num_params(), "policy: theta length mismatch");
  require(H.rows() == input_dim(), "policy: channel dimension mismatch");
  if (layout_ == PolicyLayout::joint) return forward_batch<double>(arch_, theta, support_, H);
  const int k = params_per_user();
  Mat out(static_cast<Eigen::Index>(k) * users_, H.cols());
  for (int i = 0; i < users_; ++i) {
    auto seg = theta.segment(static_cast<Eigen::Index>(i) * net_params(), net_params());
    out.middleRows(static_cast<Eigen::Index>(i) * k, k) =
        forward_batch<double>(arch_, seg, support_, Mat(H.row(i)));
  }
  return out;
}

Vec StochasticPolicy::distribution(const Vec& theta, const Vec& h) const {
  return distribution_batch(theta, Mat(h)).col(0);
}

Vec StochasticPolicy::sample_action(const Vec& dist_params, Rng& rng) const {
  if (arch_.head == OutputHead::bernoulli) return sample_bernoulli({dist_params}, rng);
  return sample_trunc_gauss(TruncGaussParams::from_head(dist_params, support_), rng);
}

Vec StochasticPolicy::location_action(const Vec& dist_params) const {
  require(arch_.head == OutputHead::truncated_gaussian,
          "policy: deterministic allocation needs a truncated-Gaussian head");
  return TruncGaussParams::from_head(dist_params, support_).mu;
}

double StochasticPolicy::log_prob(const Vec& dist_params, const Vec& p) const {
  if (arch_.head == OutputHead::bernoulli) return log_pmf_bernoulli({dist_params}, p);
  return log_pdf_trunc_gauss(TruncGaussParams::from_head(dist_params, support_), p);
}

Vec StochasticPolicy::score(const Vec& dist_params, const Vec& p) const {
  if (arch_.head == OutputHead::bernoulli) return score_bernoulli({dist_params}, p);
  return score_trunc_gauss(TruncGaussParams::from_head(dist_params, support_), p).interleaved();
}

Vec StochasticPolicy::backward_batch(const Vec& theta, const Mat& H, const Mat& upstream) const {
  require(theta.size() == num_params(), "policy: theta length mismatch");
  require(H.rows() == input_dim(), "policy: channel dimension mismatch");
  if (layout_ == PolicyLayout::joint)
    return pdlearn::backward_batch<double>(arch_, theta, support_, H, upstream);
  const int k = params_per_user();
  Vec grad(num_params());
  for (int i = 0; i < users_; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(i) * net_params();
    auto seg = theta.segment(off, net_params());
    grad.segment(off, net_params()) = pdlearn::backward_batch<double>(
        arch_, seg, support_, Mat(H.row(i)),
        Mat(upstream.middleRows(static_cast<Eigen::Index>(i) * k, k)));
  }
  return grad;
}

Vec StochasticPolicy::sample(const Vec& theta, const Vec& h, Rng& rng) const {
  return sample_action(distribution(theta, h), rng);
}

double StochasticPolicy::log_prob(const Vec& theta, const Vec& h, const Vec& p) const {
  return log_prob(distribution(theta, h), p);
}

Vec StochasticPolicy::grad_log_prob(const Vec& theta, const Vec& h, const Vec& p) const {
  const Vec d = distribution(theta, h);
  return backward_batch(theta, Mat(h), Mat(score(d, p)));
}

Vec StochasticPolicy::deterministic_action(const Vec& theta, const Vec& h) const {
  return location_action(distribution(theta, h));
}

PolicyModel StochasticPolicy::network(const Vec& theta, int index) const {
  require(index >= 0 && index < num_networks(), "policy: network index out of range");
  require(theta.size() == num_params(), "policy: theta length mismatch");
  return PolicyModel{arch_, theta.segment(static_cast<Eigen::Index>(index) * net_params(), net_params()),
                     support_};
}

void StochasticPolicy::save(const std::string& path, const Vec& theta,
                            const std::vector<std::string>& comments) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& c : comments) os << "# " << c << '\n';
  for (int k = 0; k < num_networks(); ++k) {
    std::vector<std::string> meta;
    if (k == 0) {
      meta.push_back("layout " + to_string(layout_));
      meta.push_back("users " + std::to_string(users_));
      meta.push_back("networks " + std::to_string(num_networks()));
    }
    write_model(os, network(theta, k), meta);
  }
}

std::pair<StochasticPolicy, Vec> StochasticPolicy::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
  std::vector<std::string> meta;
  PolicyModel first = read_model(is, &meta);
  std::string layout_name;
  int users = -1;
  int networks = -1;
  for (const auto& line : meta) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "layout") ls >> layout_name;
    if (key == "users") ls >> users;
    if (key == "networks") ls >> networks;
  }
  if (layout_name.empty() || users <= 0 || networks <= 0)
    throw FormatError("checkpoint: missing policy layout header");
  std::optional<StochasticPolicy> policy;
  try {
    policy.emplace(first.arch, first.support, users, parse_policy_layout(layout_name));
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: inconsistent policy header: ") + e.what());
  }
  if (policy->num_networks() != networks) throw FormatError("checkpoint: network count mismatch");
  Vec theta(policy->num_params());
  const int q = first.arch.num_params();
  theta.head(q) = first.theta;
  for (int k = 1; k < networks; ++k) {
    PolicyModel next = read_model(is, nullptr);
    if (!(next.arch == first.arch)) throw FormatError("checkpoint: per-user architectures differ");
    theta.segment(static_cast<Eigen::Index>(k) * q, q) = next.theta;
  }
  return {std::move(*policy), theta};
}

}  // namespace pdlearn
