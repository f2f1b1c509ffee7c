#pragma once

#include "robustloc/model.hpp"
#include "robustloc/sim.hpp"
#include "robustloc/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace robustloc {

enum class Method { Standard, Robust, Huber };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct SpatialGrid {
  double x_min = -20.0;
  double x_max = 20.0;
  double y_min = -20.0;
  double y_max = 20.0;
  int nx = 9;
  int ny = 9;

  std::vector<std::pair<double, double>> points() const;
};

struct ExperimentSpec {
  Network network;
  Theta theta_star;
  std::vector<Sequence> sequences;
  NoiseSpec noise;
  std::size_t n = 100;
  int runs = 100;
  std::vector<double> eps_grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::optional<SpatialGrid> spatial_grid;
  std::vector<Method> methods{Method::Standard, Method::Robust};
  SolverSettings solver;  // solver.eps_bound is the robust method's bound
  HuberSettings huber;
  double detect_threshold = 1e-5;
  std::uint64_t base_seed = 1;
  int jobs = 0;  // 0: OpenMP default

  void validate() const;
};

/// Per-run detection counts for the robust method's weights.
struct DetectionCounts {
  std::size_t corrupted = 0;
  std::size_t flagged_corrupted = 0;
  std::size_t clean = 0;
  std::size_t flagged_clean = 0;

  DetectionCounts& operator+=(const DetectionCounts& other);
};

struct DetectionRates {
  std::optional<double> p_d;   // absent when no corrupted samples
  std::optional<double> p_fa;  // absent when no clean samples
};

DetectionRates rates(const DetectionCounts& counts);

struct RunRecord {
  bool failed = false;
  std::string error;
  std::vector<double> errors;  // one per unknown node
};

struct MethodRecord {
  Method method = Method::Standard;
  std::vector<RunRecord> runs;

  int failures() const;
  /// Errors of successful runs for one unknown node, in run order.
  std::vector<double> node_errors(int node) const;
};

struct MetricsReport {
  int runs = 0;
  int unknowns = 1;
  std::vector<MethodRecord> methods;
  std::vector<DetectionCounts> detection;  // per run, robust only; empty otherwise

  const MethodRecord& method(Method m) const;
  bool has_method(Method m) const;
  double rmse(Method m, int node) const;
  int total_failures() const;
  DetectionRates aggregated_detection() const;
  bool operator==(const MetricsReport& other) const;
};

double localization_error(const Theta& estimate, const Theta& truth, int node);

/// Empirical CDF evaluated at the sorted samples: (e_(k), k / n).
std::vector<std::pair<double, double>> compute_cdf(std::vector<double> errors);
double compute_rmse(const std::vector<double>& errors);

DetectionRates detection_metrics(const Weights& weights, const std::vector<bool>& labels,
                                 double threshold);
DetectionCounts detection_counts(const Weights& weights, const std::vector<bool>& labels,
                                 double threshold);

/// Runs are distributed over OpenMP threads; results are keyed by run index so
/// the report does not depend on scheduling.
MetricsReport run_monte_carlo(const ExperimentSpec& spec);
/// Single-threaded reference used to check the parallel path.
MetricsReport run_monte_carlo_serial(const ExperimentSpec& spec);

/// One Monte-Carlo run: dataset seed base_seed + run, all methods on it.
void run_single(const ExperimentSpec& spec, int run, MetricsReport& report);

/// Solver failures above this share of runs fail an experiment.
constexpr double kFailureBudget = 0.05;
bool within_failure_budget(const MetricsReport& report);

struct SweepPoint {
  double epsilon = 0.0;
  MetricsReport report;
};

std::vector<SweepPoint> rmse_vs_epsilon(const ExperimentSpec& spec);

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  MetricsReport report;
};

std::vector<GridPoint> spatial_rmse_grid(const ExperimentSpec& spec);

// CSV reports.
void write_cdf_csv(std::ostream& out, const MetricsReport& report);
void write_rmse_csv(std::ostream& out, const std::vector<SweepPoint>& sweep);
void write_spatial_csv(std::ostream& out, const std::vector<GridPoint>& grid);
void write_detection_csv(std::ostream& out, const std::vector<SweepPoint>& sweep);

}  // namespace robustloc
