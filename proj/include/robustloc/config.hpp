#pragma once

#include "robustloc/experiments.hpp"
#include "robustloc/model.hpp"
#include "robustloc/sim.hpp"
#include "robustloc/solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace robustloc {

using ojson = nlohmann::ordered_json;

/// A parsed scenario file. Files use metres and nanoseconds; everything here
/// is SI (metres, seconds).
struct Scenario {
  Network network;
  Theta theta_star;
  Technique technique = Technique::TDOA;
  std::vector<Sequence> sequences;
  std::vector<std::string> sequence_names;
  NoiseSpec noise;
  SolverSettings solver;
  HuberSettings huber;

  int runs = 100;
  std::size_t n = 100;
  std::vector<double> eps_grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::optional<SpatialGrid> spatial_grid;
  double detect_threshold = 1e-5;
  std::vector<Method> methods{Method::Standard, Method::Robust};
  std::uint64_t seed = 1;

  ExperimentSpec experiment_spec() const;
};

/// Strict parse: unknown keys and out-of-range values raise Error(Config)
/// naming the offending field; syntax errors report line and column.
Scenario parse_config(std::string_view text);
Scenario load_config(const std::filesystem::path& path);

ojson to_json(const Scenario& scenario);

// Section codecs shared with the dataset sidecar.
ojson network_to_json(const Network& net);
ojson theta_to_json(const Theta& theta);
ojson sequences_to_json(const std::vector<Sequence>& sequences,
                        const std::vector<std::string>& names);
ojson noise_to_json(const NoiseSpec& noise);

Network network_from_json(const ojson& j);
Theta theta_from_json(const ojson& j, const std::string& field);
void sequences_from_json(const ojson& j, Technique technique, std::vector<Sequence>& sequences,
                         std::vector<std::string>& names);
NoiseSpec noise_from_json(const ojson& j);

/// Read a JSON document, reporting syntax errors with line and column.
ojson parse_json_text(std::string_view text, const std::string& source);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace robustloc
