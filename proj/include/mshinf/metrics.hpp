#pragma once

#include <string>
#include <vector>

#include "mshinf/filters.hpp"
#include "mshinf/model.hpp"

namespace mshinf {

/// Quantitative summary of one filtering run against a known truth.
struct EvalSummary {
  std::vector<double> snr_db_per_level;
  double total_cost = 0.0;
  std::vector<double> cov_trace_per_level;
  double cost_reduction_vs_baseline = 0.0;
};

/// Per-level signal-to-noise ratio in dB: 10 log10 of signal energy over
/// error energy. Levels with zero error return +infinity; a level with zero
/// signal energy is an error.
std::vector<double> snr_db(const std::vector<std::vector<double>>& truth,
                           const std::vector<std::vector<double>>& estimate);

/// Flattens a signal/report pair into the per-level state arrays snr_db
/// consumes.
std::vector<std::vector<double>> per_level_states(const TreeSignal& signal);
std::vector<std::vector<double>> per_level_states(const FilterReport& report);

/// The game performance ratio: Q-weighted output error energy over the sum
/// of prior mismatch, disturbance energy and weighted measurement noise
/// energy. The numerator runs over levels 1..K, the disturbance sum over
/// every edge, and the noise sum over every recorded observation. The
/// attenuation contract holds when the supremum over disturbances stays
/// below 1/gamma.
double game_objective(const TreeSignal& signal, const FilterReport& report,
                      const MultiscaleModel& model, double gamma);

/// Mean trace of the covariance-like matrix per level, coarse to fine.
std::vector<double> covariance_trend(const FilterReport& report);

/// Summary assembly; `baseline_cost` < 0 disables the reduction field.
EvalSummary evaluate(const TreeSignal& signal, const FilterReport& report,
                     const MultiscaleModel& model, double baseline_cost);

/// Shortest decimal form with 9 significant digits; used by every CSV and
/// manifest writer so reruns diff cleanly.
std::string format_g9(double value);

/// Fixed-schema per-level comparison CSV. Entries that were not produced
/// (filter not run) are written as nan.
struct MetricsRow {
  int level = 0;
  double snr_hinf_db = 0.0;
  double snr_kalman_db = 0.0;
  double cov_trace_hinf = 0.0;
  double cov_trace_kalman = 0.0;
  double cost_hinf = 0.0;
  double cost_kalman = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace mshinf
