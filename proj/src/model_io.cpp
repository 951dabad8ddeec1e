#include "mshinf/model_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mshinf/errors.hpp"

namespace mshinf {

namespace {

struct RawEntry {
  std::string value;
  int line = 0;
};

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_numbers(const std::string& text,
                                  const std::string& key,
                                  const std::string& origin) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ParseError(origin + ": key '" + key + "' has a malformed number '" +
                       token + "'");
    }
  }
  return out;
}

double parse_scalar(const std::string& text, const std::string& key,
                    const std::string& origin) {
  const auto values = parse_numbers(text, key, origin);
  if (values.size() != 1)
    throw ParseError(origin + ": key '" + key + "' expects a single number");
  return values[0];
}

Eigen::MatrixXd parse_matrix(const std::string& text, int rows, int cols,
                             const std::string& key, const std::string& origin) {
  const auto values = parse_numbers(text, key, origin);
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw ParseError(origin + ": key '" + key + "' expects " +
                     std::to_string(rows * cols) + " numbers (" +
                     std::to_string(rows) + "x" + std::to_string(cols) +
                     " row-major), got " + std::to_string(values.size()));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      m(i, j) = values[static_cast<std::size_t>(i) * cols + j];
  return m;
}

bool parse_node_suffix(const std::string& suffix, NodeId& node) {
  const auto colon = suffix.find(':');
  if (colon == std::string::npos) return false;
  const std::string lvl = suffix.substr(0, colon);
  const std::string idx = suffix.substr(colon + 1);
  auto to_int = [](const std::string& s, std::int64_t& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
  };
  std::int64_t level = 0, index = 0;
  if (!to_int(lvl, level) || !to_int(idx, index)) return false;
  node.level = static_cast<int>(level);
  node.index = index;
  return true;
}

}  // namespace

ModelFile parse_model_file(const std::string& text, const std::string& origin) {
  static const std::set<std::string> scalar_keys = {
      "depth", "arity", "n",        "p",        "q",   "r",
      "gamma", "seed",  "sigma_w2", "sigma_v2"};
  static const std::set<std::string> matrix_keys = {"A", "B", "C",
                                                    "L", "Q", "R"};
  static const std::set<std::string> list_keys = {"missing_stages",
                                                  "prior_mean", "prior_cov"};

  std::map<std::string, RawEntry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected 'key = value'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty())
      throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");

    std::string base = key;
    const auto at = key.find('@');
    if (at != std::string::npos) base = key.substr(0, at);
    const bool known =
        scalar_keys.count(base) || matrix_keys.count(base) || list_keys.count(base);
    const bool valid_override = at == std::string::npos ||
                                (matrix_keys.count(base) > 0);
    if (!known || !valid_override)
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    if (entries.count(key))
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": duplicate key '" + key + "'");
    entries[key] = RawEntry{value, line_no};
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    std::string value = it->second.value;
    entries.erase(it);
    return value;
  };

  auto require_int = [&](const std::string& key) {
    auto raw = take(key);
    if (!raw) throw ParseError(origin + ": missing required key '" + key + "'");
    const double v = parse_scalar(*raw, key, origin);
    if (v != static_cast<std::int64_t>(v))
      throw ParseError(origin + ": key '" + key + "' must be an integer");
    return static_cast<int>(v);
  };
  auto optional_int = [&](const std::string& key, int fallback) {
    auto raw = take(key);
    if (!raw) return fallback;
    const double v = parse_scalar(*raw, key, origin);
    if (v != static_cast<std::int64_t>(v) || v < 1)
      throw ParseError(origin + ": key '" + key +
                       "' must be a positive integer");
    return static_cast<int>(v);
  };

  const int depth = require_int("depth");
  const int arity = require_int("arity");
  TreeTopology topo(depth, arity);
  Dims dims;
  dims.n = optional_int("n", 1);
  dims.p = optional_int("p", 1);
  dims.q = optional_int("q", 1);
  dims.r = optional_int("r", 1);

  auto default_matrix = [&](const std::string& key, int rows, int cols) {
    if (rows == cols) return Eigen::MatrixXd(Eigen::MatrixXd::Identity(rows, cols));
    throw ParseError(origin + ": key '" + key + "' is required (a " +
                     std::to_string(rows) + "x" + std::to_string(cols) +
                     " matrix has no identity default)");
  };
  auto matrix_or_default = [&](const std::string& key, int rows, int cols) {
    auto raw = take(key);
    if (!raw) return default_matrix(key, rows, cols);
    return parse_matrix(*raw, rows, cols, key, origin);
  };

  NodeParams defaults;
  defaults.A = matrix_or_default("A", dims.n, dims.n);
  defaults.B = matrix_or_default("B", dims.n, dims.q);
  defaults.C = matrix_or_default("C", dims.p, dims.n);
  defaults.L = matrix_or_default("L", dims.r, dims.n);
  defaults.Q = matrix_or_default("Q", dims.r, dims.r);
  defaults.R = matrix_or_default("R", dims.p, dims.p);

  GameWeights weights;
  weights.gamma = 1.0;
  if (auto raw = take("gamma")) weights.gamma = parse_scalar(*raw, "gamma", origin);
  weights.prior_mean = Eigen::VectorXd::Zero(dims.n);
  if (auto raw = take("prior_mean")) {
    const Eigen::MatrixXd m =
        parse_matrix(*raw, dims.n, 1, "prior_mean", origin);
    weights.prior_mean = m.col(0);
  }
  weights.prior_cov = Eigen::MatrixXd::Identity(dims.n, dims.n);
  if (auto raw = take("prior_cov"))
    weights.prior_cov = parse_matrix(*raw, dims.n, dims.n, "prior_cov", origin);

  std::vector<NodeParams> params(static_cast<std::size_t>(topo.node_count()),
                                 defaults);

  // Per-node overrides: KEY@level:index.
  std::vector<std::string> override_keys;
  for (const auto& [key, entry] : entries)
    if (key.find('@') != std::string::npos) override_keys.push_back(key);
  for (const std::string& key : override_keys) {
    const auto at = key.find('@');
    const std::string base = key.substr(0, at);
    NodeId node;
    if (!parse_node_suffix(key.substr(at + 1), node))
      throw ParseError(origin + ": malformed node override '" + key +
                       "' (expected KEY@level:index)");
    if (!topo.contains(node))
      throw ParseError(origin + ": override '" + key +
                       "' addresses a node outside the tree");
    const std::string raw = *take(key);
    NodeParams& np = params[static_cast<std::size_t>(topo.flat_index(node))];
    if (base == "A") np.A = parse_matrix(raw, dims.n, dims.n, key, origin);
    else if (base == "B") np.B = parse_matrix(raw, dims.n, dims.q, key, origin);
    else if (base == "C") np.C = parse_matrix(raw, dims.p, dims.n, key, origin);
    else if (base == "L") np.L = parse_matrix(raw, dims.r, dims.n, key, origin);
    else if (base == "Q") np.Q = parse_matrix(raw, dims.r, dims.r, key, origin);
    else np.R = parse_matrix(raw, dims.p, dims.p, key, origin);
  }

  ModelFile out{
      MultiscaleModel(topo, dims, std::move(params), std::move(weights)),
      std::nullopt, std::nullopt, std::nullopt, {}};

  if (auto raw = take("sigma_w2")) {
    out.sigma_w2 = parse_scalar(*raw, "sigma_w2", origin);
    if (*out.sigma_w2 <= 0.0)
      throw ParseError(origin + ": sigma_w2 must be positive");
  }
  if (auto raw = take("sigma_v2")) {
    out.sigma_v2 = parse_scalar(*raw, "sigma_v2", origin);
    if (*out.sigma_v2 <= 0.0)
      throw ParseError(origin + ": sigma_v2 must be positive");
  }
  if (auto raw = take("seed")) {
    const double v = parse_scalar(*raw, "seed", origin);
    if (v < 0 || v != static_cast<std::uint64_t>(v))
      throw ParseError(origin + ": seed must be a nonnegative integer");
    out.seed = static_cast<std::uint64_t>(v);
  }
  if (auto raw = take("missing_stages")) {
    for (double v : parse_numbers(*raw, "missing_stages", origin)) {
      if (v != static_cast<int>(v) || v < 0 || v > depth)
        throw ParseError(origin +
                         ": missing_stages entries must be levels in [0, " +
                         std::to_string(depth) + "]");
      out.missing_stages.push_back(static_cast<int>(v));
    }
  }

  if (!entries.empty())
    throw ParseError(origin + ": unknown key '" + entries.begin()->first + "'");
  return out;
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_file(buf.str(), path);
}

}  // namespace mshinf
