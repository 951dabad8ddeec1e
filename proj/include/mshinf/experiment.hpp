#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mshinf/model_io.hpp"

namespace mshinf {

/// Parsed experiment configuration. Optional fields fall back to the model
/// file's values and then to documented defaults when the run resolves them.
struct ExperimentConfig {
  std::string scenario;
  std::string model_path;  // resolved relative to the config file
  std::string output_dir;
  std::optional<std::string> gamma;  // number or "auto"
  std::optional<double> sigma_w2;
  std::optional<double> sigma_v2;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> missing_stages;
  std::string filter = "current_hinf";

  // step1d
  std::vector<double> step_breakpoints{0.5};
  std::vector<double> step_values{0.2, 0.8};
  // image2d
  std::string image_path;
  // gamma_sweep
  std::vector<double> gamma_grid;
  // steady_state
  int steady_depth = 30;
};

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin);

/// Loads and parses `path`; model and image paths become absolute relative
/// to the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);

/// Command-line overrides applied on top of the config.
struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> filter;
  std::optional<std::string> gamma;
};

/// Runs the configured scenario and writes its artifact set (metrics CSV,
/// estimate dumps, images, manifest) into the output directory. All files
/// are staged to temporaries and renamed only when the whole run succeeded,
/// so a failed run leaves no artifacts behind. Throws InfeasibleError when
/// the resolved attenuation level admits no filter.
void run_experiment(const ExperimentConfig& config,
                    const RunOverrides& overrides = {});

/// FNV-1a 64-bit content hash used by the manifest.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace mshinf
