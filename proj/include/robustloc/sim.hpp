#pragma once

#include "robustloc/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace robustloc {

// adjacent_third: 1 on the diagonal, 1/3 on the first off-diagonals.
// full_third: 1 on the diagonal, 1/3 everywhere else.
enum class QStyle { Identity, AdjacentThird, FullThird };
enum class Mixing { Bernoulli, FixedCount };

std::string_view to_string(QStyle style);
std::string_view to_string(Mixing mixing);
QStyle q_style_from_string(std::string_view name);
Mixing mixing_from_string(std::string_view name);

struct NoiseSpec {
  double sigma_los = 3e-9;  // s
  double mu_nlos = 75e-9;   // s
  QStyle q_style = QStyle::AdjacentThird;
  double epsilon = 0.15;
  Mixing mixing = Mixing::Bernoulli;

  void validate() const;
};

Eigen::MatrixXd build_q(int m, QStyle style);

/// Deterministic random source. Uniforms take the top 53 bits of mt19937_64,
/// normals use Box-Muller and exponentials use inversion, so streams are
/// reproducible across standard libraries.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/box-muller/inverse-cdf";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();
  double exponential(double mean);
  std::size_t index(std::size_t n);  // uniform on [0, n)

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

Eigen::VectorXd sample_los(const Sequence& seq, const Theta& theta_star, const Network& net,
                           const NoiseSpec& noise, Rng& rng);
Eigen::VectorXd sample_nlos(const Sequence& seq, const Theta& theta_star, const Network& net,
                            const NoiseSpec& noise, Rng& rng);

struct Sample {
  std::size_t seq_id = 0;
  Eigen::VectorXd y;  // s
  bool corrupted = false;
};

struct Dataset {
  std::vector<Sample> samples;
  Network network;
  std::vector<Sequence> sequences;
  std::vector<std::string> sequence_names;
  std::optional<Theta> theta_star;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  std::string rng_algorithm{Rng::kAlgorithm};

  std::size_t size() const { return samples.size(); }
  Technique technique() const;
  void validate() const;
};

Dataset generate(const Network& net, const std::vector<Sequence>& sequences,
                 const Theta& theta_star, const NoiseSpec& noise, std::size_t n,
                 std::uint64_t seed);

// Dataset files: CSV `sample_id,seq_id,corrupted,y_0,...` plus a JSON sidecar
// holding seed, noise, network, sequences and theta_star.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& csv_path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& csv_path);

}  // namespace robustloc
