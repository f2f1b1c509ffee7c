#pragma once

#include "robustloc/model.hpp"
#include "robustloc/sim.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <optional>
#include <string_view>
#include <vector>

namespace robustloc {

/// Sample weights on the probability simplex.
class Weights {
 public:
  Weights() = default;
  explicit Weights(Eigen::VectorXd pi);

  static Weights uniform(std::size_t n);

  const Eigen::VectorXd& pi() const { return pi_; }
  std::size_t size() const { return static_cast<std::size_t>(pi_.size()); }
  double operator[](std::size_t i) const { return pi_(static_cast<Eigen::Index>(i)); }

  /// H(pi) = -sum pi_i ln pi_i with 0 ln 0 = 0.
  double entropy() const;

 private:
  Eigen::VectorXd pi_;
};

struct LmSettings {
  double initial_damping = 1e-3;
  double damping_scale = 10.0;
  int max_iterations = 200;
  double gradient_tol = 1e-10;  // on |J^T r| / (|J| |r|)
};

enum class InitPolicy { Grid, Fixed };

struct InitSettings {
  InitPolicy policy = InitPolicy::Grid;
  int grid = 20;      // cells per axis for x_0
  int aux_grid = 10;  // cells per axis for each auxiliary node
  std::optional<Theta> fixed;
};

struct SolverSettings {
  double eps_bound = 0.2;
  int max_outer = 100;
  double outer_tol = 1e-8;
  LmSettings lm;
  double temp_tol = 1e-12;
  InitSettings init;

  void validate() const;
};

// Objective values are reported in range units, sum_i pi_i ||c (y_i - mu_i)||^2
// in m^2. The trace holds the initial value, then one entry per half-step.
struct SolveReport {
  std::vector<double> objective_trace;
  bool converged = false;
  int outer_iterations = 0;
  double final_entropy = 0.0;
  Weights final_weights;

  nlohmann::json to_json() const;
};

/// l_i = ||y_i - mu(s_i, theta)||^2 in s^2.
Eigen::VectorXd per_sample_loss(const Dataset& data, const Theta& theta);

/// Exact minimiser of sum pi_i l_i over the simplex subject to
/// H(pi) >= ln((1 - eps_bound) n).
Weights solve_weights(const Eigen::VectorXd& losses, double eps_bound, double temp_tol = 1e-12);

struct ThetaFit {
  Theta theta;
  double objective = 0.0;      // m^2
  double gradient_norm = 0.0;  // m
  int iterations = 0;
  bool converged = false;
};

ThetaFit fit_theta(const Dataset& data, const Weights& weights, const Theta& init,
                   const LmSettings& lm);
Theta solve_theta(const Dataset& data, const Weights& weights, const Theta& init,
                  const LmSettings& lm);

/// Weighted objective in m^2 at theta.
double weighted_objective(const Dataset& data, const Weights& weights, const Theta& theta);

Theta initialize_theta(const Dataset& data, const InitSettings& init);

struct RobustResult {
  Theta theta;
  Weights weights;
  SolveReport report;
};

RobustResult robust_localize(const Dataset& data, const SolverSettings& settings);

struct NlsResult {
  Theta theta;
  SolveReport report;
};

NlsResult standard_nls(const Dataset& data, const SolverSettings& settings);

struct HuberSettings {
  double k = 1.345;
  int max_iterations = 100;
  double tol = 1e-12;
};

/// Huber M-estimate of b ~ A beta by IRLS with MAD scale.
Eigen::VectorXd huber_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                           const HuberSettings& settings);

/// TOA-only baseline through the linear form r^2 - |x_a|^2 = -2 x_a^T x_0 + alpha.
Theta huber_toa(const Dataset& data, const HuberSettings& settings = {});

}  // namespace robustloc
