#include "robustloc/error.hpp"
#include "robustloc/experiments.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <string>

namespace robustloc {

namespace {

MetricsReport empty_report(const ExperimentSpec& spec) {
  MetricsReport report;
  report.runs = spec.runs;
  report.unknowns = spec.network.unknown_count();
  for (Method m : spec.methods) {
    MethodRecord record;
    record.method = m;
    record.runs.resize(static_cast<std::size_t>(spec.runs));
    report.methods.push_back(std::move(record));
  }
  for (Method m : spec.methods) {
    if (m == Method::Robust) report.detection.resize(static_cast<std::size_t>(spec.runs));
  }
  return report;
}

std::vector<double> node_errors(const Theta& estimate, const Theta& truth) {
  std::vector<double> out;
  for (int k = 0; k < estimate.unknowns(); ++k) {
    out.push_back(localization_error(estimate, truth, k));
  }
  return out;
}

}  // namespace

void run_single(const ExperimentSpec& spec, int run, MetricsReport& report) {
  const Dataset data = generate(spec.network, spec.sequences, spec.theta_star, spec.noise, spec.n,
                                spec.base_seed + static_cast<std::uint64_t>(run));
  std::vector<bool> labels;
  labels.reserve(data.size());
  for (const auto& s : data.samples) labels.push_back(s.corrupted);

  const auto slot = static_cast<std::size_t>(run);
  for (auto& record : report.methods) {
    RunRecord& out = record.runs[slot];
    try {
      switch (record.method) {
        case Method::Standard:
          out.errors = node_errors(standard_nls(data, spec.solver).theta, spec.theta_star);
          break;
        case Method::Robust: {
          const RobustResult result = robust_localize(data, spec.solver);
          out.errors = node_errors(result.theta, spec.theta_star);
          report.detection[slot] = detection_counts(result.weights, labels, spec.detect_threshold);
          break;
        }
        case Method::Huber:
          out.errors = node_errors(huber_toa(data, spec.huber), spec.theta_star);
          break;
      }
      for (double e : out.errors) {
        if (!std::isfinite(e)) throw Error(ErrorCode::SingularGeometry, "non-finite estimate");
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
      out.errors.clear();
    }
  }
}

MetricsReport run_monte_carlo_serial(const ExperimentSpec& spec) {
  spec.validate();
  MetricsReport report = empty_report(spec);
  for (int run = 0; run < spec.runs; ++run) run_single(spec, run, report);
  return report;
}

MetricsReport run_monte_carlo(const ExperimentSpec& spec) {
  spec.validate();
  MetricsReport report = empty_report(spec);
  const int threads = spec.jobs > 0 ? spec.jobs : omp_get_max_threads();

  // Exceptions may not cross the parallel region; park them per run.
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.runs));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int run = 0; run < spec.runs; ++run) {
    try {
      run_single(spec, run, report);
    } catch (...) {
      errors[static_cast<std::size_t>(run)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

}  // namespace robustloc
