#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mshinf/model.hpp"

namespace mshinf {

/// Contents of a model description file: the model itself plus the
/// experiment defaults the file may carry.
struct ModelFile {
  MultiscaleModel model;
  std::optional<double> sigma_w2;
  std::optional<double> sigma_v2;
  std::optional<std::uint64_t> seed;
  std::vector<int> missing_stages;
};

/// Parses the flat key = value model description format.
///
/// Keys: depth, arity (required); n, p, q, r (default 1); the uniform
/// matrices A, B, C, L, Q, R as row-major number lists (identity defaults
/// when square); gamma, prior_mean, prior_cov; sigma_w2, sigma_v2, seed,
/// missing_stages. A matrix key may be overridden for a single node as
/// KEY@level:index. Unknown keys, malformed values and wrong element counts
/// are hard errors.
ModelFile parse_model_file(const std::string& text, const std::string& origin);

/// parse_model_file on the contents of `path`.
ModelFile load_model_file(const std::string& path);

}  // namespace mshinf
