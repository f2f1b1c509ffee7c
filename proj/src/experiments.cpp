#include "robustloc/experiments.hpp"

#include "robustloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <cstdio>
#include <string>

namespace robustloc {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Standard: return "standard";
    case Method::Robust: return "robust";
    case Method::Huber: return "huber";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  if (name == "standard") return Method::Standard;
  if (name == "robust") return Method::Robust;
  if (name == "huber") return Method::Huber;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

std::vector<std::pair<double, double>> SpatialGrid::points() const {
  auto axis = [](double lo, double hi, int count) {
    std::vector<double> v;
    for (int k = 0; k < count; ++k) {
      v.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
    }
    return v;
  };
  std::vector<std::pair<double, double>> out;
  for (double y : axis(y_min, y_max, ny)) {
    for (double x : axis(x_min, x_max, nx)) out.emplace_back(x, y);
  }
  return out;
}

void ExperimentSpec::validate() const {
  network.validate();
  noise.validate();
  solver.validate();
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "experiment needs sequences");
  for (const auto& seq : sequences) {
    seq.validate(network.node_count());
    if (seq.technique != sequences.front().technique) {
      throw Error(ErrorCode::InvalidSequence, "sequences mix localization techniques");
    }
  }
  if (theta_star.dim() != network.dim || theta_star.unknowns() != network.unknown_count()) {
    throw Error(ErrorCode::InvalidArgument, "theta_star does not match the network");
  }
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be at least 1");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  if (!(detect_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "detect_threshold must be positive");
  }
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no methods selected");
  for (Method m : methods) {
    if (m == Method::Huber &&
        (sequences.front().technique != Technique::TOA || network.num_aux > 0)) {
      throw Error(ErrorCode::UnsupportedTechnique,
                  "the Huber baseline needs TOA data without auxiliary nodes");
    }
  }
  for (double eps : eps_grid) {
    if (!(eps >= 0.0 && eps < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "eps_grid values must lie in [0, 1)");
    }
  }
  if (spatial_grid && (spatial_grid->nx < 1 || spatial_grid->ny < 1)) {
    throw Error(ErrorCode::InvalidArgument, "spatial grid needs at least one point per axis");
  }
}

DetectionCounts& DetectionCounts::operator+=(const DetectionCounts& other) {
  corrupted += other.corrupted;
  flagged_corrupted += other.flagged_corrupted;
  clean += other.clean;
  flagged_clean += other.flagged_clean;
  return *this;
}

DetectionRates rates(const DetectionCounts& counts) {
  DetectionRates r;
  if (counts.corrupted > 0) {
    r.p_d = static_cast<double>(counts.flagged_corrupted) / static_cast<double>(counts.corrupted);
  }
  if (counts.clean > 0) {
    r.p_fa = static_cast<double>(counts.flagged_clean) / static_cast<double>(counts.clean);
  }
  return r;
}

int MethodRecord::failures() const {
  return static_cast<int>(std::count_if(runs.begin(), runs.end(),
                                        [](const RunRecord& r) { return r.failed; }));
}

std::vector<double> MethodRecord::node_errors(int node) const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (!r.failed) out.push_back(r.errors.at(static_cast<std::size_t>(node)));
  }
  return out;
}

const MethodRecord& MetricsReport::method(Method m) const {
  for (const auto& record : methods) {
    if (record.method == m) return record;
  }
  throw Error(ErrorCode::InvalidArgument,
              "method '" + std::string(to_string(m)) + "' not in report");
}

bool MetricsReport::has_method(Method m) const {
  return std::any_of(methods.begin(), methods.end(),
                     [m](const MethodRecord& r) { return r.method == m; });
}

double MetricsReport::rmse(Method m, int node) const {
  const auto errors = method(m).node_errors(node);
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  return compute_rmse(errors);
}

int MetricsReport::total_failures() const {
  int total = 0;
  for (const auto& record : methods) total += record.failures();
  return total;
}

DetectionRates MetricsReport::aggregated_detection() const {
  DetectionCounts pooled;
  for (const auto& counts : detection) pooled += counts;
  return rates(pooled);
}

bool MetricsReport::operator==(const MetricsReport& other) const {
  if (runs != other.runs || unknowns != other.unknowns ||
      methods.size() != other.methods.size() || detection.size() != other.detection.size()) {
    return false;
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& a = methods[m];
    const auto& b = other.methods[m];
    if (a.method != b.method || a.runs.size() != b.runs.size()) return false;
    for (std::size_t r = 0; r < a.runs.size(); ++r) {
      if (a.runs[r].failed != b.runs[r].failed || a.runs[r].errors != b.runs[r].errors) {
        return false;
      }
    }
  }
  for (std::size_t r = 0; r < detection.size(); ++r) {
    const auto& a = detection[r];
    const auto& b = other.detection[r];
    if (a.corrupted != b.corrupted || a.flagged_corrupted != b.flagged_corrupted ||
        a.clean != b.clean || a.flagged_clean != b.flagged_clean) {
      return false;
    }
  }
  return true;
}

double localization_error(const Theta& estimate, const Theta& truth, int node) {
  if (node < 0 || node >= estimate.unknowns() || node >= truth.unknowns() ||
      estimate.dim() != truth.dim()) {
    throw Error(ErrorCode::InvalidArgument, "node index " + std::to_string(node) +
                                                " out of range for localization error");
  }
  return (estimate.node(node) - truth.node(node)).norm();
}

std::vector<std::pair<double, double>> compute_cdf(std::vector<double> errors) {
  if (errors.empty()) throw Error(ErrorCode::InvalidArgument, "CDF of an empty error set");
  std::sort(errors.begin(), errors.end());
  const auto n = static_cast<double>(errors.size());
  std::vector<std::pair<double, double>> cdf;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    // Right-continuous: a repeated value reports the fraction after its last copy.
    if (k + 1 < errors.size() && errors[k + 1] == errors[k]) continue;
    cdf.emplace_back(errors[k], static_cast<double>(k + 1) / n);
  }
  return cdf;
}

double compute_rmse(const std::vector<double>& errors) {
  if (errors.empty()) throw Error(ErrorCode::InvalidArgument, "RMSE of an empty error set");
  double sum = 0.0;
  for (double e : errors) sum += e * e;
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

DetectionCounts detection_counts(const Weights& weights, const std::vector<bool>& labels,
                                 double threshold) {
  if (weights.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "weights and labels differ in length");
  }
  DetectionCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool flagged = weights[i] < threshold;
    if (labels[i]) {
      ++counts.corrupted;
      counts.flagged_corrupted += flagged ? 1 : 0;
    } else {
      ++counts.clean;
      counts.flagged_clean += flagged ? 1 : 0;
    }
  }
  return counts;
}

DetectionRates detection_metrics(const Weights& weights, const std::vector<bool>& labels,
                                 double threshold) {
  return rates(detection_counts(weights, labels, threshold));
}

bool within_failure_budget(const MetricsReport& report) {
  for (const auto& record : report.methods) {
    if (record.failures() > kFailureBudget * report.runs) return false;
  }
  return true;
}

std::vector<SweepPoint> rmse_vs_epsilon(const ExperimentSpec& spec) {
  if (spec.eps_grid.empty()) throw Error(ErrorCode::InvalidArgument, "eps_grid is empty");
  std::vector<SweepPoint> out;
  for (double eps : spec.eps_grid) {
    ExperimentSpec point = spec;
    point.noise.epsilon = eps;
    out.push_back({eps, run_monte_carlo(point)});
  }
  return out;
}

std::vector<GridPoint> spatial_rmse_grid(const ExperimentSpec& spec) {
  if (!spec.spatial_grid) throw Error(ErrorCode::InvalidArgument, "no spatial grid configured");
  std::vector<GridPoint> out;
  for (const auto& [x, y] : spec.spatial_grid->points()) {
    ExperimentSpec point = spec;
    point.theta_star.node(0)(0) = x;
    point.theta_star.node(0)(1) = y;
    out.push_back({x, y, run_monte_carlo(point)});
  }
  return out;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) put(out, *v);
}

}  // namespace

void write_cdf_csv(std::ostream& out, const MetricsReport& report) {
  out << "method,node,error,fraction\n";
  for (const auto& record : report.methods) {
    for (int node = 0; node < report.unknowns; ++node) {
      std::vector<double> errors = record.node_errors(node);
      std::sort(errors.begin(), errors.end());
      const auto n = static_cast<double>(errors.size());
      for (std::size_t k = 0; k < errors.size(); ++k) {
        out << to_string(record.method) << ',' << node << ',';
        put(out, errors[k]);
        out << ',';
        put(out, static_cast<double>(k + 1) / n);
        out << '\n';
      }
    }
  }
}

void write_rmse_csv(std::ostream& out, const std::vector<SweepPoint>& sweep) {
  out << "epsilon,method,node,rmse,failures\n";
  for (const auto& point : sweep) {
    for (const auto& record : point.report.methods) {
      for (int node = 0; node < point.report.unknowns; ++node) {
        put(out, point.epsilon);
        out << ',' << to_string(record.method) << ',' << node << ',';
        put(out, point.report.rmse(record.method, node));
        out << ',' << record.failures() << '\n';
      }
    }
  }
}

void write_spatial_csv(std::ostream& out, const std::vector<GridPoint>& grid) {
  out << "x,y";
  if (!grid.empty()) {
    for (const auto& record : grid.front().report.methods) {
      out << ",rmse_" << to_string(record.method);
    }
  }
  out << '\n';
  for (const auto& point : grid) {
    put(out, point.x);
    out << ',';
    put(out, point.y);
    for (const auto& record : point.report.methods) {
      out << ',';
      put(out, point.report.rmse(record.method, 0));
    }
    out << '\n';
  }
}

void write_detection_csv(std::ostream& out, const std::vector<SweepPoint>& sweep) {
  out << "epsilon,p_d,p_fa,runs\n";
  for (const auto& point : sweep) {
    const DetectionRates r = point.report.aggregated_detection();
    put(out, point.epsilon);
    out << ',';
    put(out, r.p_d);
    out << ',';
    put(out, r.p_fa);
    out << ',' << point.report.runs << '\n';
  }
}

}  // namespace robustloc
