#include "robustloc/config.hpp"
#include "robustloc/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace robustloc;

namespace {

const char* kMinimal = R"({
  "network": {"anchors": [[0, 0], [10, 0], [0, 10], [10, 10]]},
  "technique": "TDOA",
  "theta_star": [[3, 4]],
  "sequences": {"a": [1, 2, 3, 4], "b": {"nodes": [4, 3, 2, 1], "delta_ns": 2.5}}
})";

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    return e.what();
  }
  FAIL("config was accepted");
  return {};
}

std::string with(const std::string& key_json) {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), "," + key_json);
  return text;
}

}  // namespace

TEST_CASE("minimal config with defaults") {
  const Scenario sc = parse_config(kMinimal);
  CHECK(sc.network.dim == 2);
  CHECK(sc.network.c == kSpeedOfLight);
  CHECK(sc.network.delta == 0.0);
  CHECK(sc.technique == Technique::TDOA);
  REQUIRE(sc.sequences.size() == 2);
  CHECK(sc.sequence_names == std::vector<std::string>{"a", "b"});
  CHECK(sc.sequences[0].nodes == std::vector<NodeId>{1, 2, 3, 4});
  CHECK_FALSE(sc.sequences[0].delta.has_value());
  CHECK(*sc.sequences[1].delta == 2.5e-9);
  CHECK(sc.noise.q_style == QStyle::AdjacentThird);
  CHECK(sc.noise.sigma_los == 3e-9);
  CHECK(sc.noise.mu_nlos == 75e-9);
  CHECK(sc.seed == 1);
  CHECK(sc.runs == 100);
}

TEST_CASE("TOA without a noise block defaults to identity Q") {
  std::string text = kMinimal;
  text.replace(text.find("TDOA"), 4, "TOA");
  CHECK(parse_config(text).noise.q_style == QStyle::Identity);
}

TEST_CASE("units are nanoseconds at the boundary") {
  const Scenario sc = parse_config(
      with(R"("noise": {"sigma_los_ns": 1.5, "mu_nlos_ns": 40, "epsilon": 0.2, "q_style": "full_third", "mixing": "fixed_count"})"));
  CHECK(sc.noise.sigma_los == 1.5e-9);
  CHECK(sc.noise.mu_nlos == 40e-9);
  CHECK(sc.noise.q_style == QStyle::FullThird);
  CHECK(sc.noise.mixing == Mixing::FixedCount);
}

TEST_CASE("errors name the offending field") {
  CHECK(config_error(with(R"("noise": {"epsilon": 1.5})")).find("noise.epsilon") !=
        std::string::npos);
  CHECK(config_error(with(R"("bogus": 1)")).find("bogus: unknown key") != std::string::npos);
  CHECK(config_error(with(R"("solver": {"lm": {"tolerance": 1}})")).find("solver.lm.tolerance") !=
        std::string::npos);
  CHECK(config_error(with(R"("experiment": {"methods": ["huber"]})")).find("experiment.methods") !=
        std::string::npos);
  CHECK(config_error(with(R"("experiment": {"eps_grid": [0.1, 1.0]})")).find("eps_grid[1]") !=
        std::string::npos);
  CHECK(config_error(with(R"("solver": {"eps_bound": -0.1})")).find("solver.eps_bound") !=
        std::string::npos);
  CHECK(config_error(with(R"("seed": -3)")).find("seed") != std::string::npos);
  CHECK(config_error(with(R"("noise": {"q_style": "banded"})")).find("noise.q_style") !=
        std::string::npos);

  std::string bad_seq = kMinimal;
  bad_seq.replace(bad_seq.find("[1, 2, 3, 4]"), 12, "[1, 1, 2]");
  CHECK(config_error(bad_seq).find("sequences.a") != std::string::npos);

  std::string bad_theta = kMinimal;
  bad_theta.replace(bad_theta.find("[[3, 4]]"), 8, "[[3, 4, 5]]");
  CHECK(config_error(bad_theta).find("theta_star") != std::string::npos);

  std::string missing = kMinimal;
  missing.replace(missing.find("\"technique\""), 20, "");
  CHECK(config_error(missing).find("technique: missing required field") != std::string::npos);
}

TEST_CASE("syntax errors report line and column") {
  const std::string text = "{\n  \"network\": {\n    \"dim\": 2,,\n  }\n}";
  const std::string msg = config_error(text);
  CHECK(msg.find("config:3:") == 0);
}

TEST_CASE("bundled scenarios load with the default noise settings") {
  for (const char* name : {"toa", "tdoa", "tdst", "tdst_aux"}) {
    const Scenario sc = support::scenario(name);
    CHECK(sc.noise.sigma_los == 3e-9);
    CHECK(sc.noise.mu_nlos == 75e-9);
    CHECK(sc.noise.epsilon == 0.15);
    CHECK(sc.solver.eps_bound == 0.2);
    CHECK(sc.n == 100);
    CHECK_NOTHROW(sc.experiment_spec().validate());
  }
  const Scenario tdoa = support::scenario("tdoa");
  CHECK(tdoa.network.anchors.size() == 8);
  CHECK(tdoa.sequences[0].nodes == std::vector<NodeId>{6, 5, 7, 8});
  CHECK(tdoa.sequences[1].nodes == std::vector<NodeId>{4, 3, 2, 1});
  CHECK(tdoa.theta_star.node(0) == Eigen::Vector2d(5, 5));
  const Scenario tdst = support::scenario("tdst");
  CHECK(tdst.sequences.size() == 4);
  CHECK(tdst.sequences[2].nodes == std::vector<NodeId>{5, 3, 6, 4});
  const Scenario aux = support::scenario("tdst_aux");
  CHECK(aux.network.num_aux == 1);
  CHECK(aux.theta_star.node(1) == Eigen::Vector2d(-10, 10));
  CHECK(aux.sequences[1].nodes.size() == 14);
}

TEST_CASE("to_json round-trips") {
  const Scenario sc = support::scenario("tdst_aux");
  const Scenario back = parse_config(to_json(sc).dump());
  CHECK(to_json(back).dump() == to_json(sc).dump());
  CHECK(back.theta_star == sc.theta_star);
  CHECK(back.noise.sigma_los == sc.noise.sigma_los);
  CHECK(back.methods == sc.methods);
}

TEST_CASE("load_config prefixes the path") {
  try {
    load_config("/nonexistent/x.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
  const auto dir = support::scratch_dir("config");
  const auto path = dir / "bad.json";
  {
    std::ofstream(path) << with(R"("noise": {"epsilon": 2})");
  }
  try {
    load_config(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(path.string()) == 0);
    CHECK(msg.find("noise.epsilon") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
