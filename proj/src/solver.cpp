#include "robustloc/solver.hpp"

#include "robustloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace robustloc {

Weights::Weights(Eigen::VectorXd pi) : pi_(std::move(pi)) {}

Weights Weights::uniform(std::size_t n) {
  return Weights(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

double Weights::entropy() const {
  double h = 0.0;
  for (Eigen::Index i = 0; i < pi_.size(); ++i) {
    if (pi_(i) > 0.0) h -= pi_(i) * std::log(pi_(i));
  }
  return h;
}

void SolverSettings::validate() const {
  if (!(eps_bound >= 0.0 && eps_bound < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "eps_bound must lie in [0, 1)");
  }
  if (max_outer < 1) throw Error(ErrorCode::InvalidArgument, "max_outer must be at least 1");
  if (!(outer_tol > 0.0) || !(temp_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "solver tolerances must be positive");
  }
  if (!(lm.initial_damping > 0.0) || !(lm.damping_scale > 1.0) || lm.max_iterations < 1 ||
      !(lm.gradient_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid damped least-squares settings");
  }
  if (init.grid < 1 || init.aux_grid < 1) {
    throw Error(ErrorCode::InvalidArgument, "initialisation grid must have at least one cell");
  }
  if (init.policy == InitPolicy::Fixed && !init.fixed) {
    throw Error(ErrorCode::InvalidArgument, "fixed initialisation needs a point");
  }
}

nlohmann::json SolveReport::to_json() const {
  nlohmann::json j;
  j["objective_trace"] = objective_trace;
  j["converged"] = converged;
  j["outer_iterations"] = outer_iterations;
  j["final_entropy"] = final_entropy;
  return j;
}

namespace {

MeasurementModel model_of(const Dataset& data) {
  return MeasurementModel(data.network, data.sequences);
}

double objective_with(const MeasurementModel& model, const Dataset& data,
                      const Eigen::VectorXd& pi, const Theta& theta) {
  const double c = data.network.c;
  double total = 0.0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const double w = pi(static_cast<Eigen::Index>(i));
    if (w == 0.0) continue;
    const auto& s = data.samples[i];
    total += w * (c * (s.y - model.predict(s.seq_id, theta))).squaredNorm();
  }
  return total;
}

}  // namespace

Eigen::VectorXd per_sample_loss(const Dataset& data, const Theta& theta) {
  const MeasurementModel model = model_of(data);
  Eigen::VectorXd loss(static_cast<Eigen::Index>(data.samples.size()));
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    loss(static_cast<Eigen::Index>(i)) = (s.y - model.predict(s.seq_id, theta)).squaredNorm();
  }
  return loss;
}

double weighted_objective(const Dataset& data, const Weights& weights, const Theta& theta) {
  return objective_with(model_of(data), data, weights.pi(), theta);
}

// The constrained optimum is a Gibbs distribution pi_i(T) ~ exp(-(l_i - l_min) / T)
// whose entropy increases with T; bisect on log T until the entropy meets the
// bound from above.
Weights solve_weights(const Eigen::VectorXd& losses, double eps_bound, double temp_tol) {
  const Eigen::Index n = losses.size();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "weights need at least one loss");
  if (!losses.allFinite() || (losses.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "losses must be finite and non-negative");
  }
  if (!(eps_bound >= 0.0 && eps_bound < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "eps_bound must lie in [0, 1)");
  }
  if (!(temp_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "temp_tol must be positive");

  const double support = (1.0 - eps_bound) * static_cast<double>(n);
  if (support <= 1.0 + 1e-12) {
    throw Error(ErrorCode::InfeasibleBound,
                "(1 - eps_bound) n = " + std::to_string(support) +
                    " leaves no room for a spread-out weight distribution");
  }
  if (eps_bound == 0.0) return Weights::uniform(static_cast<std::size_t>(n));

  const double target = std::log(support);
  const double lo_loss = losses.minCoeff();
  const double range = losses.maxCoeff() - lo_loss;
  if (range == 0.0) return Weights::uniform(static_cast<std::size_t>(n));

  // Normalised losses in [0, 1]; the minimiser is invariant to shift and scale.
  const Eigen::ArrayXd z = (losses.array() - lo_loss) / range;

  auto gibbs = [&z](double temperature) -> Eigen::VectorXd {
    Eigen::ArrayXd w = (-z / temperature).exp();
    return (w / w.sum()).matrix();
  };
  auto entropy_at = [&z](double temperature) {
    const Eigen::ArrayXd w = (-z / temperature).exp();
    const double total = w.sum();
    return std::log(total) + (w * z).sum() / (temperature * total);
  };

  const auto ties = (z == 0.0).count();
  if (target <= std::log(static_cast<double>(ties))) {
    Eigen::VectorXd pi = (z == 0.0).cast<double>().matrix();
    return Weights(pi / static_cast<double>(ties));
  }

  double t_lo = 1e-12;
  if (entropy_at(t_lo) >= target) return Weights(gibbs(t_lo));

  double t_hi = 1.0;
  for (int k = 0; k < 2000 && entropy_at(t_hi) < target; ++k) t_hi *= 2.0;

  double h_hi = entropy_at(t_hi);
  for (int iter = 0; iter < 200 && h_hi - target > temp_tol; ++iter) {
    const double mid = std::sqrt(t_lo * t_hi);
    if (!(mid > t_lo && mid < t_hi)) break;
    const double h_mid = entropy_at(mid);
    if (h_mid >= target) {
      t_hi = mid;
      h_hi = h_mid;
    } else {
      t_lo = mid;
    }
  }
  return Weights(gibbs(t_hi));
}

namespace {

struct WeightedProblem {
  const Dataset& data;
  const MeasurementModel model;
  std::vector<std::size_t> active;  // samples with non-zero weight
  std::vector<double> sqrt_w;
  Eigen::Index rows = 0;

  WeightedProblem(const Dataset& d, const Weights& weights) : data(d), model(model_of(d)) {
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
      if (weights[i] > 0.0) {
        active.push_back(i);
        sqrt_w.push_back(std::sqrt(weights[i]));
        rows += d.samples[i].y.size();
      }
    }
  }

  double objective(const Theta& theta) const {
    const double c = data.network.c;
    double total = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& s = data.samples[active[k]];
      total += sqrt_w[k] * sqrt_w[k] * (c * (s.y - model.predict(s.seq_id, theta))).squaredNorm();
    }
    return total;
  }

  // Residuals sqrt(pi_i) c (y_i - mu_i) and their Jacobian with respect to theta.
  void linearize(const Theta& theta, Eigen::VectorXd& residual, Eigen::MatrixXd& jac) const {
    const double c = data.network.c;
    residual.resize(rows);
    jac.resize(rows, theta.size());
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& s = data.samples[active[k]];
      const Eigen::Index m = s.y.size();
      residual.segment(offset, m) = (sqrt_w[k] * c) * (s.y - model.predict(s.seq_id, theta));
      jac.middleRows(offset, m) = (-sqrt_w[k] * c) * model.jacobian(s.seq_id, theta);
      offset += m;
    }
  }
};

// Scale-free first-order test: |J^T r| <= tol |J| |r|, the cosine between the
// residual and the Jacobian's columns. An absolute bound in m cannot be met
// once the objective's roundoff exceeds tol^2.
bool stationary(const Eigen::VectorXd& half_grad, const Eigen::MatrixXd& jac,
                const Eigen::VectorXd& residual, double tol) {
  return half_grad.norm() <= tol * jac.norm() * residual.norm();
}

// Re-linearise at theta, nudging it once off a coincident node if needed.
void linearize_or_nudge(const WeightedProblem& problem, Theta& theta, double& objective,
                        Eigen::VectorXd& residual, Eigen::MatrixXd& jac) {
  try {
    problem.linearize(theta, residual, jac);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularGeometry) throw;
    theta.coords().array() += 1e-9;
    problem.linearize(theta, residual, jac);
    objective = problem.objective(theta);
  }
}

}  // namespace

ThetaFit fit_theta(const Dataset& data, const Weights& weights, const Theta& init,
                   const LmSettings& lm) {
  if (weights.size() != data.samples.size()) {
    throw Error(ErrorCode::InvalidArgument, "weights and dataset sizes differ");
  }
  if (!init.coords().allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "initial theta is not finite");
  }
  const WeightedProblem problem(data, weights);

  ThetaFit fit;
  fit.theta = init;
  fit.objective = problem.objective(fit.theta);

  Eigen::VectorXd residual;
  Eigen::MatrixXd jac;
  linearize_or_nudge(problem, fit.theta, fit.objective, residual, jac);

  double damping = lm.initial_damping;
  for (int iter = 0; iter < lm.max_iterations; ++iter) {
    const Eigen::VectorXd half_grad = jac.transpose() * residual;
    fit.gradient_norm = 2.0 * half_grad.norm();
    if (stationary(half_grad, jac, residual, lm.gradient_tol)) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd scale =
        normal.diagonal().cwiseMax(1e-12 * std::max(normal.diagonal().maxCoeff(), 1e-300));

    bool accepted = false;
    while (!accepted && damping < 1e16) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += damping * scale;
      const Eigen::VectorXd step = damped.ldlt().solve(-half_grad);
      Theta candidate = fit.theta;
      candidate.coords() += step;
      const double value = candidate.coords().allFinite()
                               ? problem.objective(candidate)
                               : std::numeric_limits<double>::infinity();
      if (value < fit.objective) {
        fit.theta = std::move(candidate);
        fit.objective = value;
        damping = std::max(damping / lm.damping_scale, 1e-15);
        accepted = true;
      } else {
        damping *= lm.damping_scale;
      }
    }
    ++fit.iterations;
    if (!accepted) {
      // No representable decrease remains. Count it as converged when even the
      // undamped Gauss-Newton step predicts less than a few ulps of progress.
      const Eigen::VectorXd gn = normal.ldlt().solve(-half_grad);
      const double predicted = -half_grad.dot(gn);
      fit.converged = predicted <= 64.0 * std::numeric_limits<double>::epsilon() * fit.objective;
      return fit;
    }
    linearize_or_nudge(problem, fit.theta, fit.objective, residual, jac);
  }
  if (!fit.converged) {
    const Eigen::VectorXd half_grad = jac.transpose() * residual;
    fit.gradient_norm = 2.0 * half_grad.norm();
    fit.converged = stationary(half_grad, jac, residual, lm.gradient_tol);
  }
  return fit;
}

Theta solve_theta(const Dataset& data, const Weights& weights, const Theta& init,
                  const LmSettings& lm) {
  return fit_theta(data, weights, init, lm).theta;
}

namespace {

struct GridAxis {
  double lo = 0.0;
  double step = 0.0;
  int cells = 1;

  double center(int k) const { return lo + (k + 0.5) * step; }
};

std::vector<GridAxis> anchor_box(const Network& net, int cells) {
  std::vector<GridAxis> axes(static_cast<std::size_t>(net.dim));
  if (net.anchors.empty()) {
    for (auto& a : axes) a = {-1.0, 2.0 / cells, cells};
    return axes;
  }
  Eigen::VectorXd lo = net.anchors.front();
  Eigen::VectorXd hi = net.anchors.front();
  for (const auto& a : net.anchors) {
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
  }
  const double widest = std::max((hi - lo).maxCoeff(), 1.0);
  for (int d = 0; d < net.dim; ++d) {
    const double mid = 0.5 * (lo(d) + hi(d));
    double width = hi(d) - lo(d);
    if (width <= 0.0) width = widest;
    width *= 1.25;
    axes[static_cast<std::size_t>(d)] = {mid - 0.5 * width, width / cells, cells};
  }
  return axes;
}

// Exhaustive search over one node's grid with the others held fixed. Ties
// keep the lowest linear cell index.
void grid_node(const MeasurementModel& model, const Dataset& data, const Eigen::VectorXd& uniform,
               Theta& theta, int node, const std::vector<GridAxis>& axes) {
  const int dim = theta.dim();
  long total = 1;
  for (const auto& a : axes) total *= a.cells;

  Theta probe = theta;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point = theta.node(node);
  for (long cell = 0; cell < total; ++cell) {
    long rest = cell;
    for (int d = 0; d < dim; ++d) {
      const auto& axis = axes[static_cast<std::size_t>(d)];
      probe.node(node)(d) = axis.center(static_cast<int>(rest % axis.cells));
      rest /= axis.cells;
    }
    const double value = objective_with(model, data, uniform, probe);
    if (value < best) {
      best = value;
      best_point = probe.node(node);
    }
  }
  theta.node(node) = best_point;
}

}  // namespace

Theta initialize_theta(const Dataset& data, const InitSettings& init) {
  const Network& net = data.network;
  if (init.policy == InitPolicy::Fixed) {
    if (!init.fixed) throw Error(ErrorCode::InvalidArgument, "fixed initialisation needs a point");
    if (init.fixed->dim() != net.dim || init.fixed->unknowns() != net.unknown_count()) {
      throw Error(ErrorCode::InvalidArgument, "fixed initial point does not match the network");
    }
    return *init.fixed;
  }

  const MeasurementModel model = model_of(data);
  const Eigen::VectorXd uniform = Weights::uniform(data.size()).pi();
  const auto main_axes = anchor_box(net, init.grid);
  const auto aux_axes = anchor_box(net, init.aux_grid);

  Theta theta(net.dim, net.unknown_count());
  for (int k = 0; k < theta.unknowns(); ++k) {
    for (int d = 0; d < net.dim; ++d) {
      const auto& a = main_axes[static_cast<std::size_t>(d)];
      theta.node(k)(d) = a.lo + 0.5 * a.step * a.cells;
    }
  }

  // Auxiliary nodes couple with x_0, so cycle over the unknowns twice.
  const int sweeps = net.num_aux > 0 ? 2 : 1;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    grid_node(model, data, uniform, theta, 0, main_axes);
    for (int k = 1; k <= net.num_aux; ++k) grid_node(model, data, uniform, theta, k, aux_axes);
  }
  return theta;
}

RobustResult robust_localize(const Dataset& data, const SolverSettings& settings) {
  data.validate();
  settings.validate();
  const MeasurementModel model = model_of(data);

  RobustResult out;
  out.theta = initialize_theta(data, settings.init);
  out.weights = Weights::uniform(data.size());
  auto& trace = out.report.objective_trace;
  trace.push_back(objective_with(model, data, out.weights.pi(), out.theta));

  double previous = trace.back();
  for (int k = 0; k < settings.max_outer; ++k) {
    const ThetaFit fit = fit_theta(data, out.weights, out.theta, settings.lm);
    out.theta = fit.theta;
    const double after_theta = objective_with(model, data, out.weights.pi(), out.theta);
    trace.push_back(after_theta);

    Weights next = solve_weights(per_sample_loss(data, out.theta), settings.eps_bound,
                                 settings.temp_tol);
    double after_pi = objective_with(model, data, next.pi(), out.theta);
    if (after_pi > after_theta) {
      // The previous weights are feasible, so never accept a worse point.
      next = out.weights;
      after_pi = after_theta;
    }
    trace.push_back(after_pi);
    ++out.report.outer_iterations;

    const bool fixed_point = next.pi() == out.weights.pi();
    out.weights = std::move(next);
    const double decrease = previous - after_pi;
    if (fixed_point || decrease <= settings.outer_tol * std::max(std::abs(previous), 1e-300)) {
      out.report.converged = true;
      break;
    }
    previous = after_pi;
  }
  out.report.final_entropy = out.weights.entropy();
  out.report.final_weights = out.weights;
  return out;
}

NlsResult standard_nls(const Dataset& data, const SolverSettings& settings) {
  data.validate();
  settings.validate();
  const Weights uniform = Weights::uniform(data.size());
  const Theta init = initialize_theta(data, settings.init);

  NlsResult out;
  const ThetaFit fit = fit_theta(data, uniform, init, settings.lm);
  out.theta = fit.theta;
  out.report.objective_trace = {weighted_objective(data, uniform, init), fit.objective};
  out.report.converged = fit.converged;
  out.report.outer_iterations = 1;
  out.report.final_entropy = uniform.entropy();
  out.report.final_weights = uniform;
  return out;
}

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double mad_scale(const Eigen::VectorXd& e) {
  std::vector<double> v(e.data(), e.data() + e.size());
  const double center = median(v);
  for (auto& x : v) x = std::abs(x - center);
  return 1.4826 * median(std::move(v));
}

Eigen::VectorXd weighted_lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                               const Eigen::VectorXd& w) {
  const Eigen::VectorXd sw = w.array().sqrt().matrix();
  const Eigen::MatrixXd aw = sw.asDiagonal() * a;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
  if (qr.rank() < a.cols()) {
    throw Error(ErrorCode::Underdetermined, "Huber design matrix is rank deficient");
  }
  return qr.solve(sw.asDiagonal() * b);
}

}  // namespace

Eigen::VectorXd huber_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                           const HuberSettings& settings) {
  if (design.rows() != rhs.size()) {
    throw Error(ErrorCode::InvalidArgument, "design and right-hand side sizes differ");
  }
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(rhs.size());
  Eigen::VectorXd beta = weighted_lstsq(design, rhs, weights);
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const Eigen::VectorXd resid = rhs - design * beta;
    const double threshold = settings.k * mad_scale(resid);
    if (!(threshold > 0.0)) break;  // exact fit
    for (Eigen::Index i = 0; i < resid.size(); ++i) {
      const double a = std::abs(resid(i));
      weights(i) = a <= threshold ? 1.0 : threshold / a;
    }
    const Eigen::VectorXd next = weighted_lstsq(design, rhs, weights);
    const double change = (next - beta).norm();
    beta = next;
    if (change <= settings.tol * (beta.norm() + settings.tol)) break;
  }
  return beta;
}

Theta huber_toa(const Dataset& data, const HuberSettings& settings) {
  data.validate();
  const Network& net = data.network;
  if (data.technique() != Technique::TOA) {
    throw Error(ErrorCode::UnsupportedTechnique, "the Huber baseline supports TOA data only");
  }
  if (net.num_aux > 0) {
    throw Error(ErrorCode::UnsupportedTechnique,
                "the Huber baseline cannot estimate auxiliary nodes");
  }

  Eigen::Index rows = 0;
  for (const auto& s : data.samples) rows += s.y.size();
  if (rows < net.dim + 2) {
    throw Error(ErrorCode::Underdetermined,
                "Huber TOA needs at least " + std::to_string(net.dim + 2) + " ranges");
  }

  Eigen::MatrixXd design(rows, net.dim + 1);
  Eigen::VectorXd rhs(rows);
  Eigen::Index r = 0;
  for (const auto& s : data.samples) {
    const Sequence& seq = data.sequences[s.seq_id];
    const double delta = seq.delta.value_or(net.delta);
    for (std::size_t k = 0; k < seq.nodes.size(); ++k, ++r) {
      const Eigen::VectorXd& xa = net.anchor(seq.nodes[k]);
      const double range = net.c * (s.y(static_cast<Eigen::Index>(k)) - delta) / 2.0;
      design.block(r, 0, 1, net.dim) = -2.0 * xa.transpose();
      design(r, net.dim) = 1.0;
      rhs(r) = range * range - xa.squaredNorm();
    }
  }
  const Eigen::VectorXd beta = huber_irls(design, rhs, settings);
  return Theta(beta.head(net.dim), net.dim);
}

}  // namespace robustloc
