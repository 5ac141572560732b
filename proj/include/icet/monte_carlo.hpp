#pragma once

#include "icet/icet_solver.hpp"
#include "icet/ndt.hpp"
#include "icet/simulator.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace icet {

enum class Algorithm { icet, ndt, both };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);

struct ScenarioConfig {
  EnvironmentKind environment = EnvironmentKind::t_intersection;
  EnvironmentParams environment_params;
  /// Used when environment == custom.
  std::optional<Environment> custom_environment;
  std::size_t trials = 1000;
  StateVector truth{5.0, 10.0, 0.1};
  ScanSpec scan;
  /// Voxelization shared by ICET and NDT.
  GridConfig grid;
  IcetConfig icet;
  NdtConfig ndt;
  std::uint64_t base_seed = 1;
  Algorithm algorithms = Algorithm::both;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
  [[nodiscard]] Environment build() const;
  /// Seeds for trial i derive from base_seed + i.
  [[nodiscard]] TrialSpec trial_spec(std::size_t i) const;
};

[[nodiscard]] nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
[[nodiscard]] ScenarioConfig scenario_from_json(const nlohmann::json& j);

/// Outcome of one algorithm on one trial.
struct AlgoRecord {
  bool ok = false;
  std::string failure;
  Vector3 error = Vector3::Zero();  // x_hat - x_true, theta wrapped
  std::size_t iterations = 0;
  bool converged = false;
  // ICET only
  bool has_prediction = false;
  Vector3 predicted_std = Vector3::Zero();
  std::array<bool, 3> excluded{false, false, false};
  bool used_subspace = false;
  double excluded_angle_deg = 0.0;  // first eliminated direction, when used_subspace
  double nees = 0.0;
  int nees_dof = 0;
};

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t ref_seed = 0;
  std::uint64_t new_seed = 0;
  std::optional<AlgoRecord> icet;
  std::optional<AlgoRecord> ndt;
};

struct AxisStats {
  bool available = false;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
};

/// Sample mean and (n-1) standard deviation. Throws std::domain_error on
/// empty input; std is 0 for a single value.
[[nodiscard]] AxisStats sample_statistics(std::span<const double> values);

/// Per-axis error statistics for one algorithm. Failed trials and axes that
/// were excluded from the solution are skipped; an axis excluded in every
/// trial comes back unavailable. Throws std::domain_error on empty input.
[[nodiscard]] std::array<AxisStats, 3> error_statistics(std::span<const TrialRecord> records,
                                                        Algorithm which);

struct Consistency {
  std::optional<double> nees_mean;
  double mean_nees_dof = 0.0;
  std::array<std::optional<double>, 3> mean_predicted_std;
  /// actual std / mean predicted std, per axis.
  std::array<std::optional<double>, 3> ratio;
};

[[nodiscard]] Consistency consistency_check(std::span<const TrialRecord> records);

struct AlgoSummary {
  std::size_t attempted = 0;
  std::size_t failures = 0;
  std::array<AxisStats, 3> error;
  // ICET only
  std::optional<Consistency> consistency;
  double ambiguity_rate = 0.0;
  /// 1-degree bins of the eliminated translation heading, [0, 180).
  std::map<int, std::size_t> excluded_angle_histogram;
};

struct McReport {
  nlohmann::json scenario;
  std::optional<AlgoSummary> icet;
  std::optional<AlgoSummary> ndt;
  std::vector<TrialRecord> records;
};

/// Rebuilds every aggregate from the raw records.
[[nodiscard]] McReport summarize(std::vector<TrialRecord> records, nlohmann::json scenario = {});

/// Runs every trial (concurrently when threads allow), records per-trial
/// failures, and throws std::runtime_error when more than 10% of the trials
/// of any algorithm fail.
[[nodiscard]] McReport run_monte_carlo(const ScenarioConfig& cfg);

/// One trial, both or either algorithm, from x0 = 0.
[[nodiscard]] TrialRecord run_trial(const ScenarioConfig& cfg, const Environment& env,
                                    std::size_t index);

[[nodiscard]] nlohmann::json report_to_json(const McReport& report);

void write_records_csv(std::ostream& os, std::span<const TrialRecord> records);
[[nodiscard]] std::vector<TrialRecord> read_records_csv(std::istream& is);

/// Error histogram rows: algorithm, axis, bin_lo, bin_hi, count.
void write_error_histograms_csv(std::ostream& os, std::span<const TrialRecord> records,
                                std::size_t bins = 40);

/// Two-sigma ellipse parameters of the reference voxels for one trial.
void write_ellipses_csv(std::ostream& os, const ScenarioConfig& cfg, std::size_t trial = 0);

/// Text tables in the layout "NDT Actual / ICET Actual / ICET Predicted".
[[nodiscard]] std::string render_comparison_table(const McReport& report,
                                                  const std::string& title);

/// Mann-Whitney U two-sided p-value (normal approximation with tie correction).
[[nodiscard]] double mann_whitney_p_value(std::span<const double> a, std::span<const double> b);

}  // namespace icet
