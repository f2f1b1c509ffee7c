#include "robustloc/error.hpp"
#include "robustloc/experiments.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace robustloc;

namespace {

ExperimentSpec spec_for(const std::string& name, int runs) {
  ExperimentSpec spec = support::scenario(name).experiment_spec();
  spec.runs = runs;
  return spec;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Standard error of an RMSE estimate by the delta method.
double rmse_std_error(const std::vector<double>& errors) {
  const double n = static_cast<double>(errors.size());
  double m2 = 0.0;
  double m4 = 0.0;
  for (double e : errors) {
    m2 += e * e;
    m4 += e * e * e * e;
  }
  m2 /= n;
  m4 /= n;
  const double var_sq = std::max(m4 - m2 * m2, 0.0);
  return std::sqrt(var_sq / n) / (2.0 * std::sqrt(m2));
}

}  // namespace

TEST_CASE("localization_error") {
  const Theta truth = Theta::from_points({Eigen::Vector2d(5, 5), Eigen::Vector2d(-10, 10)});
  Theta est = truth;
  CHECK(localization_error(est, truth, 0) == 0.0);
  est.node(0) = Eigen::Vector2d(8, 9);
  CHECK(localization_error(est, truth, 0) == 5.0);
  CHECK(localization_error(est, truth, 1) == 0.0);
  CHECK_THROWS_AS(localization_error(est, truth, 2), Error);
  CHECK_THROWS_AS(localization_error(est, truth, -1), Error);
}

TEST_CASE("compute_cdf") {
  const auto cdf = compute_cdf({3, 1, 2});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[0] == std::pair<double, double>{1, 1.0 / 3});
  CHECK(cdf[1] == std::pair<double, double>{2, 2.0 / 3});
  CHECK(cdf[2] == std::pair<double, double>{3, 1.0});

  const auto flat = compute_cdf({4, 4, 4, 4});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].second == 1.0);

  CHECK_THROWS_AS(compute_cdf({}), Error);

  // Sort-and-count oracle with repeated values.
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> u(0, 20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> e(57);
    for (auto& x : e) x = 0.5 * u(gen);
    const auto got = compute_cdf(e);
    double last_fraction = 0.0;
    double last_value = -1.0;
    for (const auto& [value, fraction] : got) {
      const auto count = std::count_if(e.begin(), e.end(), [&](double x) { return x <= value; });
      CHECK(fraction == static_cast<double>(count) / e.size());
      CHECK(value > last_value);
      CHECK(fraction > last_fraction);
      last_value = value;
      last_fraction = fraction;
    }
    CHECK(last_fraction == 1.0);
  }
}

TEST_CASE("compute_rmse") {
  CHECK(compute_rmse({3, 4}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(compute_rmse({0, 0, 0}) == 0.0);
  CHECK_THROWS_AS(compute_rmse({}), Error);
  std::mt19937_64 gen(1);
  std::exponential_distribution<double> ex(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> e(30);
    double mean = 0.0;
    for (auto& x : e) mean += (x = ex(gen));
    mean /= e.size();
    CHECK(compute_rmse(e) >= mean);
  }
}

TEST_CASE("detection_metrics") {
  Eigen::VectorXd pi(4);
  pi << 0.3, 0.3, 0.2, 0.2;
  const std::vector<bool> labels{true, false, false, true};
  const auto none = detection_metrics(Weights(pi), labels, 1e-5);
  CHECK(*none.p_d == 0.0);
  CHECK(*none.p_fa == 0.0);

  pi << 1e-5, 0.5, 0.5 - 2e-5, 1e-5 - 1e-12;
  const auto edge = detection_metrics(Weights(pi), labels, 1e-5);
  CHECK(*edge.p_d == 0.5);  // exactly at threshold is not flagged
  CHECK(*edge.p_fa == 0.0);

  const auto clean_only = detection_metrics(Weights(pi), {false, false, false, false}, 1e-5);
  CHECK_FALSE(clean_only.p_d.has_value());
  CHECK(clean_only.p_fa.has_value());

  CHECK_THROWS_AS(detection_metrics(Weights(pi), {true}, 1e-5), Error);
}

TEST_CASE("run_monte_carlo is deterministic and matches the serial reference") {
  ExperimentSpec spec = spec_for("tdoa", 12);
  spec.n = 60;
  const MetricsReport serial = run_monte_carlo_serial(spec);
  for (int jobs : {0, 1, 2, 4}) {
    spec.jobs = jobs;
    CHECK(run_monte_carlo(spec) == serial);
  }
  CHECK(run_monte_carlo(spec) == run_monte_carlo(spec));
  CHECK(serial.detection.size() == 12);
  for (const auto& record : serial.methods) {
    for (const auto& run : record.runs) {
      CHECK_FALSE(run.failed);
      for (double e : run.errors) CHECK(e >= 0.0);
    }
  }
}

TEST_CASE("methods are paired on the same dataset") {
  ExperimentSpec spec = spec_for("toa", 6);
  spec.methods = {Method::Standard};
  const MetricsReport alone = run_monte_carlo(spec);
  spec.methods = {Method::Robust, Method::Huber, Method::Standard};
  const MetricsReport all = run_monte_carlo(spec);
  CHECK(all.method(Method::Standard).node_errors(0) == alone.method(Method::Standard).node_errors(0));
}

TEST_CASE("tight noise: every method sits at the noise floor") {
  ExperimentSpec spec = spec_for("toa", 1);
  spec.noise.epsilon = 0.0;
  spec.noise.sigma_los = 0.3e-9;
  spec.methods = {Method::Standard, Method::Robust, Method::Huber};
  const MetricsReport r = run_monte_carlo(spec);
  for (Method m : spec.methods) {
    CHECK(r.method(m).node_errors(0).at(0) < 10.0 * kSpeedOfLight * spec.noise.sigma_los);
  }
}

TEST_CASE("solver failures are recorded per run") {
  ExperimentSpec spec = spec_for("toa", 4);
  spec.sequences = {Sequence{{1, 5, 7}, Technique::TOA, std::nullopt}};
  spec.n = 1;  // three ranges are too few for the Huber linear form
  spec.methods = {Method::Standard, Method::Huber};
  const MetricsReport r = run_monte_carlo(spec);
  CHECK(r.method(Method::Huber).failures() == 4);
  CHECK(r.method(Method::Huber).runs[0].error.find("at least") != std::string::npos);
  CHECK(r.method(Method::Standard).failures() == 0);
  CHECK(r.total_failures() == 4);
  CHECK_FALSE(within_failure_budget(r));
  CHECK(std::isnan(r.rmse(Method::Huber, 0)));
}

TEST_CASE("spec validation") {
  ExperimentSpec spec = spec_for("tdoa", 1);
  spec.methods = {Method::Huber};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = spec_for("tdoa", 0);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = spec_for("tdoa", 1);
  spec.detect_threshold = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("rmse_vs_epsilon trends") {
  ExperimentSpec spec = spec_for("tdoa", 30);
  spec.solver.eps_bound = 0.5;
  spec.eps_grid = {0.1, 0.2, 0.3, 0.4};
  const auto sweep = rmse_vs_epsilon(spec);
  REQUIRE(sweep.size() == 4);
  for (std::size_t k = 1; k < sweep.size(); ++k) {
    CHECK(sweep[k].report.rmse(Method::Standard, 0) > sweep[k - 1].report.rmse(Method::Standard, 0));
  }
  CHECK(sweep[3].report.rmse(Method::Robust, 0) < sweep[0].report.rmse(Method::Standard, 0));
  CHECK(sweep[2].epsilon == 0.3);
}

TEST_CASE("clean data: robust RMSE within 1.5x of standard") {
  // At eps_bound 0.2; the 0.5 sweep setting costs more efficiency (see README).
  for (const char* name : {"toa", "tdst"}) {
    ExperimentSpec spec = spec_for(name, 50);
    spec.solver.eps_bound = 0.2;
    spec.eps_grid = {0.0};
    const auto sweep = rmse_vs_epsilon(spec);
    const double ratio =
        sweep[0].report.rmse(Method::Robust, 0) / sweep[0].report.rmse(Method::Standard, 0);
    CHECK(ratio <= 1.5);
  }
}

TEST_CASE("spatial grid") {
  ExperimentSpec spec = spec_for("toa", 40);
  spec.methods = {Method::Standard, Method::Robust};

  spec.spatial_grid = SpatialGrid{3.0, 3.0, -4.0, -4.0, 1, 1};
  const auto single = spatial_rmse_grid(spec);
  REQUIRE(single.size() == 1);
  ExperimentSpec moved = spec;
  moved.theta_star.node(0) = Eigen::Vector2d(3.0, -4.0);
  CHECK(single[0].report == run_monte_carlo(moved));

  // TOA with identity Q: the two sequences swap under a half turn, so the
  // RMSE map is point-symmetric.
  spec.spatial_grid = SpatialGrid{-12.0, 12.0, -6.0, 6.0, 3, 2};
  const auto grid = spatial_rmse_grid(spec);
  REQUIRE(grid.size() == 6);
  int robust_better = 0;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const std::size_t b = grid.size() - 1 - a;
    CHECK(grid[a].x == -grid[b].x);
    CHECK(grid[a].y == -grid[b].y);
    for (Method m : spec.methods) {
      const auto ea = grid[a].report.method(m).node_errors(0);
      const auto eb = grid[b].report.method(m).node_errors(0);
      const double gap = std::abs(compute_rmse(ea) - compute_rmse(eb));
      CHECK(gap <= 3.0 * std::hypot(rmse_std_error(ea), rmse_std_error(eb)));
    }
    robust_better += grid[a].report.rmse(Method::Robust, 0) <= grid[a].report.rmse(Method::Standard, 0);
  }
  CHECK(robust_better >= 0.9 * grid.size());

  std::ostringstream out;
  write_spatial_csv(out, grid);
  CHECK(out.str().rfind("x,y,rmse_standard,rmse_robust\n", 0) == 0);
  CHECK(count_lines(out.str()) == 7);
}

TEST_CASE("report CSV layouts") {
  ExperimentSpec spec = spec_for("tdst_aux", 5);
  spec.n = 60;
  spec.eps_grid = {0.1, 0.2};
  const auto sweep = rmse_vs_epsilon(spec);

  std::ostringstream cdf;
  write_cdf_csv(cdf, sweep[0].report);
  CHECK(cdf.str().rfind("method,node,error,fraction\n", 0) == 0);
  CHECK(count_lines(cdf.str()) == 1 + 2 * 2 * 5);  // methods x nodes x runs

  std::ostringstream rmse;
  write_rmse_csv(rmse, sweep);
  CHECK(rmse.str().rfind("epsilon,method,node,rmse,failures\n", 0) == 0);
  CHECK(count_lines(rmse.str()) == 1 + 2 * 2 * 2);

  std::ostringstream det;
  write_detection_csv(det, sweep);
  CHECK(det.str().rfind("epsilon,p_d,p_fa,runs\n", 0) == 0);
  CHECK(count_lines(det.str()) == 3);

  const DetectionRates rates = sweep[1].report.aggregated_detection();
  REQUIRE(rates.p_d.has_value());
  CHECK(*rates.p_d >= 0.0);
  CHECK(*rates.p_d <= 1.0);
  CHECK(*rates.p_fa <= 1.0);
}
