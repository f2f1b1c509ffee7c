#pragma once

#include "robustloc/config.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace support {

inline robustloc::Scenario scenario(const std::string& name) {
  return robustloc::load_config(std::filesystem::path(ROBUSTLOC_SCENARIOS) / (name + ".json"));
}

inline Eigen::VectorXd random_point(std::mt19937_64& gen, int dim, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Eigen::VectorXd p(dim);
  for (int k = 0; k < dim; ++k) p(k) = u(gen);
  return p;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("robustloc_" + tag + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
