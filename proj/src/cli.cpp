#include "robustloc/cli.hpp"

#include "robustloc/config.hpp"
#include "robustloc/error.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

namespace robustloc::cli {

namespace {

namespace fs = std::filesystem;

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("robustloc");
    const char* env = std::getenv("ROBUSTLOC_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return log;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::SingularGeometry:
    case ErrorCode::Underdetermined:
    case ErrorCode::InvalidQ:
      return kExitRuntime;
    default:
      return kExitUsage;
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson point_list(const Theta& theta) { return theta_to_json(theta); }

}  // namespace

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = load_config(opts.config);
    const std::uint64_t seed = opts.seed.value_or(sc.seed);
    logger()->info("simulating {} samples with seed {}", sc.n, seed);
    Dataset data = generate(sc.network, sc.sequences, sc.theta_star, sc.noise, sc.n, seed);
    data.sequence_names = sc.sequence_names;
    write_dataset(opts.out, data);
    out << "wrote " << opts.out.string() << " and " << sidecar_path(opts.out).string() << '\n';
    return kExitOk;
  });
}

int cmd_localize(const LocalizeOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Dataset data = read_dataset(opts.dataset);
    SolverSettings settings;
    if (opts.eps_bound) settings.eps_bound = *opts.eps_bound;
    settings.validate();

    ojson result;
    result["method"] = std::string(to_string(opts.method));
    Theta estimate;
    switch (opts.method) {
      case Method::Standard: {
        const NlsResult fit = standard_nls(data, settings);
        estimate = fit.theta;
        result["report"] = fit.report.to_json();
        break;
      }
      case Method::Robust: {
        const RobustResult fit = robust_localize(data, settings);
        estimate = fit.theta;
        result["eps_bound"] = settings.eps_bound;
        result["report"] = fit.report.to_json();
        const fs::path weights_path =
            opts.weights_out.value_or(fs::path(opts.dataset).replace_extension(".weights.csv"));
        std::ofstream w(weights_path, std::ios::binary);
        if (!w) throw Error(ErrorCode::Io, "cannot write '" + weights_path.string() + "'");
        w << "sample_id,weight,corrupted\n";
        char buf[40];
        for (std::size_t i = 0; i < data.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17e", fit.weights[i]);
          w << i << ',' << buf << ',' << (data.samples[i].corrupted ? 1 : 0) << '\n';
        }
        result["weights_csv"] = weights_path.string();
        break;
      }
      case Method::Huber:
        estimate = huber_toa(data);
        break;
    }
    result["theta_m"] = point_list(estimate);
    if (data.theta_star && estimate.unknowns() <= data.theta_star->unknowns()) {
      ojson errors = ojson::array();
      for (int k = 0; k < estimate.unknowns(); ++k) {
        errors.push_back(localization_error(estimate, *data.theta_star, k));
      }
      result["error_m"] = errors;
    }
    out << result.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_experiment(const ExperimentOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.kind != "cdf" && opts.kind != "rmse-sweep" && opts.kind != "spatial" &&
        opts.kind != "detect") {
      throw Error(ErrorCode::InvalidArgument, "unknown experiment kind '" + opts.kind +
                                                  "' (expected cdf, rmse-sweep, spatial, detect)");
    }
    Scenario sc = load_config(opts.config);
    if (opts.seed) sc.seed = *opts.seed;
    ExperimentSpec spec = sc.experiment_spec();
    spec.jobs = opts.jobs;

    if (fs::exists(opts.out_dir) && !fs::is_empty(opts.out_dir) && !opts.force) {
      throw Error(ErrorCode::InvalidArgument, "output directory '" + opts.out_dir.string() +
                                                  "' is not empty (use --force)");
    }
    fs::create_directories(opts.out_dir);

    ojson manifest;
    manifest["kind"] = opts.kind;
    manifest["config"] = to_json(sc);
    ojson failures = ojson::array();
    bool budget_ok = true;
    auto note = [&](double eps, const MetricsReport& report) {
      ojson entry;
      entry["epsilon"] = eps;
      for (const auto& record : report.methods) {
        entry[std::string(to_string(record.method))] = record.failures();
      }
      failures.push_back(entry);
      budget_ok = budget_ok && within_failure_budget(report);
    };

    std::string file;
    std::ostringstream csv;
    logger()->info("running '{}' experiment with {} runs per point", opts.kind, spec.runs);
    if (opts.kind == "cdf") {
      const MetricsReport report = run_monte_carlo(spec);
      note(spec.noise.epsilon, report);
      write_cdf_csv(csv, report);
      file = "cdf.csv";
    } else if (opts.kind == "rmse-sweep") {
      const auto sweep = rmse_vs_epsilon(spec);
      for (const auto& p : sweep) note(p.epsilon, p.report);
      write_rmse_csv(csv, sweep);
      file = "rmse_vs_eps.csv";
    } else if (opts.kind == "spatial") {
      if (!spec.spatial_grid) {
        throw Error(ErrorCode::Config, "experiment.spatial_grid: required for kind 'spatial'");
      }
      const auto grid = spatial_rmse_grid(spec);
      for (const auto& p : grid) note(spec.noise.epsilon, p.report);
      write_spatial_csv(csv, grid);
      file = "spatial_grid.csv";
    } else {
      spec.methods = {Method::Robust};
      const auto sweep = rmse_vs_epsilon(spec);
      for (const auto& p : sweep) note(p.epsilon, p.report);
      write_detection_csv(csv, sweep);
      file = "detection.csv";
    }
    write_file(opts.out_dir / file, csv.str());

    manifest["files"] = {file};
    manifest["failures"] = failures;
    manifest["failure_budget"] = kFailureBudget;
    manifest["within_failure_budget"] = budget_ok;
    manifest["generated_at"] = utc_timestamp();
    write_file(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");

    out << "wrote " << (opts.out_dir / file).string() << '\n';
    if (!budget_ok) {
      err << "error: solver failures exceeded " << kFailureBudget * 100 << "% of runs\n";
      return kExitRuntime;
    }
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust timing-based localization under NLOS contamination", "robustloc"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Draw a dataset from a scenario config");
  simulate->add_option("config", sim.config, "Scenario JSON")->required();
  simulate->add_option("out", sim.out, "Dataset CSV path (sidecar written next to it)")->required();
  simulate->add_option("--seed", sim.seed, "Override the config seed");

  LocalizeOptions loc;
  std::string method = "robust";
  auto* localize = app.add_subcommand("localize", "Estimate node positions from a dataset");
  localize->add_option("dataset", loc.dataset, "Dataset CSV")->required();
  localize->add_option("--method", method, "standard | robust | huber")
      ->check(CLI::IsMember({"standard", "robust", "huber"}));
  localize->add_option("--eps-bound", loc.eps_bound, "Upper bound on the corrupted fraction");
  localize->add_option("--weights-out", loc.weights_out, "Where to write robust weights");

  ExperimentOptions exp;
  auto* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo experiment");
  experiment->add_option("config", exp.config, "Scenario JSON")->required();
  experiment->add_option("--kind", exp.kind, "cdf | rmse-sweep | spatial | detect")->required();
  experiment->add_option("--out", exp.out_dir, "Output directory")->required();
  experiment->add_flag("--force", exp.force, "Write into a non-empty output directory");
  experiment->add_option("--jobs", exp.jobs, "Worker thread cap (0: all)");
  experiment->add_option("--seed", exp.seed, "Override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*simulate) return cmd_simulate(sim, out, err);
  if (*localize) {
    loc.method = method_from_string(method);
    return cmd_localize(loc, out, err);
  }
  return cmd_experiment(exp, out, err);
}

}  // namespace robustloc::cli
