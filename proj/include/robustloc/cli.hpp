#pragma once

#include "robustloc/experiments.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace robustloc::cli {

// Exit-code contract.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SimulateOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct LocalizeOptions {
  std::filesystem::path dataset;
  Method method = Method::Robust;
  std::optional<double> eps_bound;
  std::optional<std::filesystem::path> weights_out;
};

struct ExperimentOptions {
  std::filesystem::path config;
  std::string kind;  // cdf | rmse-sweep | spatial | detect
  std::filesystem::path out_dir;
  bool force = false;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_localize(const LocalizeOptions& opts, std::ostream& out, std::ostream& err);
int cmd_experiment(const ExperimentOptions& opts, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace robustloc::cli
