#include "pdlearn/mlp.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pdlearn {

int MlpArchitecture::num_params() const {
  int q = 0;
  for (int l = 0; l < num_layers(); ++l)
    q += layer_sizes[l] * layer_sizes[l + 1] + (bias ? layer_sizes[l + 1] : 0);
  return q;
}

void MlpArchitecture::validate() const {
  require(layer_sizes.size() >= 2, "mlp: need at least input and output sizes");
  for (int s : layer_sizes) require(s > 0, "mlp: layer sizes must be positive");
  require(static_cast<int>(activations.size()) == num_layers(),
          "mlp: one activation per layer required");
  if (head == OutputHead::truncated_gaussian)
    require(output_dim() % 2 == 0, "mlp: truncated-Gaussian head needs 2 outputs per user");
}

MlpArchitecture MlpArchitecture::feedforward(int input, const std::vector<int>& hidden, int output,
                                             OutputHead head, bool bias,
                                             Activation hidden_activation) {
  MlpArchitecture arch;
  arch.layer_sizes.push_back(input);
  for (int h : hidden) {
    arch.layer_sizes.push_back(h);
    arch.activations.push_back(hidden_activation);
  }
  arch.layer_sizes.push_back(output);
  arch.activations.push_back(Activation::identity);
  arch.head = head;
  arch.bias = bias;
  arch.validate();
  return arch;
}

bool operator==(const MlpArchitecture& a, const MlpArchitecture& b) {
  return a.layer_sizes == b.layer_sizes && a.activations == b.activations && a.head == b.head &&
         a.bias == b.bias;
}

void PolicyModel::validate() const {
  arch.validate();
  require(theta.size() == arch.num_params(), "model: theta length does not match architecture");
  require(support.lower < support.upper, "model: empty support");
}

Vec forward(const PolicyModel& model, const Vec& h) {
  return forward_batch<double>(model.arch, model.theta, model.support, Mat(h)).col(0);
}

Vec backward(const PolicyModel& model, const Vec& h, const Vec& upstream) {
  return backward_batch<double>(model.arch, model.theta, model.support, Mat(h), Mat(upstream));
}

Vec initial_parameters(const MlpArchitecture& arch, Rng& rng) {
  Vec theta = Vec::Zero(arch.num_params());
  Eigen::Index offset = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    const int fan_in = arch.layer_sizes[l];
    const int fan_out = arch.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (int i = 0; i < fan_in * fan_out; ++i) theta(offset++) = uni(rng);
    if (arch.bias) offset += fan_out;
  }
  return theta;
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string to_string(OutputHead h) {
  switch (h) {
    case OutputHead::truncated_gaussian: return "truncated-gaussian";
    case OutputHead::bernoulli: return "bernoulli";
    case OutputHead::raw: return "raw";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + s + "'");
}

OutputHead parse_output_head(const std::string& s) {
  if (s == "truncated-gaussian") return OutputHead::truncated_gaussian;
  if (s == "bernoulli") return OutputHead::bernoulli;
  if (s == "raw") return OutputHead::raw;
  throw FormatError("unknown output head '" + s + "'");
}

namespace {

constexpr const char* kMagic = "pdlearn-model";
constexpr int kVersion = 1;

std::string next_line(std::istream& is, const char* what) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    return line;
  }
  throw FormatError(std::string("checkpoint truncated before '") + what + "'");
}

std::istringstream expect_key(std::istream& is, const std::string& key) {
  std::string line = next_line(is, key.c_str());
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw FormatError("checkpoint: expected '" + key + "', found '" + got + "'");
  return ls;
}

}  // namespace

void write_model(std::ostream& os, const PolicyModel& model,
                 const std::vector<std::string>& extra_header) {
  model.validate();
  os << "# pdlearn policy checkpoint\n";
  os << "format " << kMagic << ' ' << kVersion << '\n';
  for (const auto& line : extra_header) os << "meta " << line << '\n';
  os << "layers";
  for (int s : model.arch.layer_sizes) os << ' ' << s;
  os << "\nactivations";
  for (auto a : model.arch.activations) os << ' ' << to_string(a);
  os << "\nhead " << to_string(model.arch.head) << '\n';
  os << "bias " << (model.arch.bias ? 1 : 0) << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "support " << model.support.lower << ' ' << model.support.upper << '\n';
  os << "params " << model.theta.size() << '\n';
  for (Eigen::Index i = 0; i < model.theta.size(); ++i) os << model.theta(i) << '\n';
  os << "end\n";
}

PolicyModel read_model(std::istream& is, std::vector<std::string>* extra_header) {
  PolicyModel model;
  {
    auto ls = expect_key(is, "format");
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kMagic || version != kVersion) throw FormatError("checkpoint: unsupported format");
  }
  std::string line = next_line(is, "layers");
  while (line.rfind("meta ", 0) == 0) {
    if (extra_header) extra_header->push_back(line.substr(5));
    line = next_line(is, "layers");
  }
  {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != "layers") throw FormatError("checkpoint: expected 'layers'");
    int s;
    while (ls >> s) model.arch.layer_sizes.push_back(s);
  }
  {
    auto ls = expect_key(is, "activations");
    std::string a;
    while (ls >> a) model.arch.activations.push_back(parse_activation(a));
  }
  {
    auto ls = expect_key(is, "head");
    std::string h;
    ls >> h;
    model.arch.head = parse_output_head(h);
  }
  {
    auto ls = expect_key(is, "bias");
    int b = -1;
    ls >> b;
    if (b != 0 && b != 1) throw FormatError("checkpoint: bias flag must be 0 or 1");
    model.arch.bias = b == 1;
  }
  {
    auto ls = expect_key(is, "support");
    if (!(ls >> model.support.lower >> model.support.upper))
      throw FormatError("checkpoint: malformed support");
  }
  Eigen::Index n = -1;
  {
    auto ls = expect_key(is, "params");
    if (!(ls >> n) || n < 0) throw FormatError("checkpoint: malformed parameter count");
  }
  try {
    model.arch.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: invalid architecture: ") + e.what());
  }
  if (n != model.arch.num_params())
    throw FormatError("checkpoint: parameter count does not match architecture");
  model.theta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::string v = next_line(is, "parameter value");
    std::size_t used = 0;
    try {
      model.theta(i) = std::stod(v, &used);
    } catch (const std::exception&) {
      throw FormatError("checkpoint: malformed parameter value '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(model.theta(i)))
      throw FormatError("checkpoint: malformed parameter value '" + v + "'");
  }
  if (next_line(is, "end") != "end") throw FormatError("checkpoint: missing end marker");
  return model;
}

void save_model(const std::string& path, const PolicyModel& model,
                const std::vector<std::string>& extra_header) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_model(os, model, extra_header);
}

PolicyModel load_model(const std::string& path, std::vector<std::string>* extra_header) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
  return read_model(is, extra_header);
}

}  // namespace pdlearn
