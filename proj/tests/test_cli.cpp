#include "robustloc/cli.hpp"
#include "robustloc/config.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <fstream>
#include <functional>
#include <sstream>

using namespace robustloc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "robustloc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string scenario_path(const std::string& name) {
  return (fs::path(ROBUSTLOC_SCENARIOS) / (name + ".json")).string();
}

// Copy of a bundled scenario with edits applied.
fs::path edited(const fs::path& dir, const std::string& name,
                const std::function<void(ojson&)>& edit) {
  ojson j = parse_json_text(read_text_file(scenario_path(name)), name);
  edit(j);
  const fs::path out = dir / (name + "_edited.json");
  std::ofstream(out) << j.dump(2);
  return out;
}

ojson localize_json(const std::vector<std::string>& args) {
  const Outcome o = invoke(args);
  REQUIRE(o.code == 0);
  return ojson::parse(o.out);
}

}  // namespace

TEST_CASE("simulate writes n rows and a sidecar; seeds are reproducible") {
  const auto dir = support::scratch_dir("cli_sim");
  const auto a = (dir / "a.csv").string();
  const auto b = (dir / "b.csv").string();
  REQUIRE(invoke({"simulate", scenario_path("tdoa"), a}).code == 0);
  REQUIRE(invoke({"simulate", scenario_path("tdoa"), b}).code == 0);
  CHECK(fs::exists(dir / "a.json"));
  CHECK(lines(slurp(a)) == 101);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  REQUIRE(invoke({"simulate", scenario_path("tdoa"), b, "--seed", "99"}).code == 0);
  CHECK(slurp(a) != slurp(b));
  CHECK(read_dataset(b).seed == 99);
  fs::remove_all(dir);
}

TEST_CASE("simulate rejects an invalid config with exit 2") {
  const auto dir = support::scratch_dir("cli_bad");
  const auto cfg = edited(dir, "tdoa", [](ojson& j) { j["noise"]["epsilon"] = 1.2; });
  const Outcome o = invoke({"simulate", cfg.string(), (dir / "x.csv").string()});
  CHECK(o.code == 2);
  CHECK(o.err.find("noise.epsilon") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x.csv"));

  CHECK(invoke({"simulate", (dir / "missing.json").string(), (dir / "x.csv").string()}).code == 2);
  CHECK(invoke({"simulate"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("localize: methods, weights file and degeneracies") {
  const auto dir = support::scratch_dir("cli_loc");
  const auto data = (dir / "d.csv").string();
  REQUIRE(invoke({"simulate", scenario_path("tdoa"), data}).code == 0);

  const ojson robust = localize_json({"localize", data});
  CHECK(robust["method"] == "robust");
  CHECK(robust["eps_bound"] == 0.2);
  CHECK(robust["error_m"].size() == 1);
  CHECK(robust["report"]["objective_trace"].size() > 2);
  const fs::path weights = dir / "d.weights.csv";
  REQUIRE(fs::exists(weights));
  CHECK(lines(slurp(weights)) == 101);
  CHECK(robust["weights_csv"] == weights.string());

  const ojson zero = localize_json({"localize", data, "--eps-bound", "0",
                                    "--weights-out", (dir / "w0.csv").string()});
  const ojson standard = localize_json({"localize", data, "--method", "standard"});
  CHECK(zero["theta_m"] == standard["theta_m"]);
  CHECK(zero["error_m"] == standard["error_m"]);
  CHECK(fs::exists(dir / "w0.csv"));

  const Outcome huber = invoke({"localize", data, "--method", "huber"});
  CHECK(huber.code == 2);
  CHECK(huber.err.find("unsupported technique") != std::string::npos);

  CHECK(invoke({"localize", data, "--eps-bound", "0.995"}).code == 2);
  CHECK(invoke({"localize", data, "--method", "lasso"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("localize on noiseless data reports zero error for every method") {
  const auto dir = support::scratch_dir("cli_clean");
  for (const char* name : {"toa", "tdoa", "tdst", "tdst_aux"}) {
    const Scenario sc = support::scenario(name);
    Dataset d = generate(sc.network, sc.sequences, sc.theta_star, sc.noise, 100, 5);
    for (auto& s : d.samples) {
      s.y = predict(d.sequences[s.seq_id], sc.theta_star, sc.network);
      s.corrupted = false;
    }
    const auto path = (dir / (std::string(name) + ".csv")).string();
    write_dataset(path, d);
    std::vector<std::string> methods{"standard", "robust"};
    if (std::string(name) == "toa") methods.push_back("huber");
    for (const auto& m : methods) {
      const ojson j = localize_json({"localize", path, "--method", m});
      for (const auto& e : j["error_m"]) CHECK(e.get<double>() <= 1e-6);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("localize: robust beats standard on most contaminated datasets") {
  const auto dir = support::scratch_dir("cli_pair");
  const auto data = (dir / "d.csv").string();
  int wins = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    REQUIRE(invoke({"simulate", scenario_path("tdoa"), data, "--seed", std::to_string(seed)}).code == 0);
    const double robust = localize_json({"localize", data})["error_m"][0].get<double>();
    const double standard =
        localize_json({"localize", data, "--method", "standard"})["error_m"][0].get<double>();
    wins += robust < standard;
  }
  CHECK(wins >= 80);
  fs::remove_all(dir);
}

TEST_CASE("experiment outputs, refusal and determinism") {
  const auto dir = support::scratch_dir("cli_exp");
  const auto out = dir / "cdf";
  REQUIRE(invoke({"experiment", scenario_path("tdoa"), "--kind", "cdf", "--out", out.string()}).code == 0);
  const std::string cdf = slurp(out / "cdf.csv");
  CHECK(lines(cdf) == 1 + 2 * 100);
  std::size_t robust_rows = 0;
  std::istringstream in(cdf);
  for (std::string line; std::getline(in, line);) robust_rows += line.rfind("robust,", 0) == 0;
  CHECK(robust_rows == 100);
  const ojson manifest = ojson::parse(slurp(out / "manifest.json"));
  CHECK(manifest["kind"] == "cdf");
  CHECK(manifest.contains("generated_at"));
  CHECK(manifest["within_failure_budget"] == true);

  // Non-empty directory needs --force.
  const Outcome again = invoke({"experiment", scenario_path("tdoa"), "--kind", "cdf", "--out", out.string()});
  CHECK(again.code == 2);
  CHECK(again.err.find("--force") != std::string::npos);
  REQUIRE(invoke({"experiment", scenario_path("tdoa"), "--kind", "cdf", "--out", out.string(),
               "--force", "--jobs", "3"}).code == 0);
  CHECK(slurp(out / "cdf.csv") == cdf);

  const auto small = edited(dir, "tdoa", [](ojson& j) {
    j["experiment"]["runs"] = 4;
    j["experiment"]["eps_grid"] = {0.1, 0.2, 0.3};
  });
  REQUIRE(invoke({"experiment", small.string(), "--kind", "detect", "--out", (dir / "det").string()}).code == 0);
  CHECK(lines(slurp(dir / "det" / "detection.csv")) == 4);
  REQUIRE(invoke({"experiment", small.string(), "--kind", "rmse-sweep", "--out", (dir / "sw").string()}).code == 0);
  CHECK(lines(slurp(dir / "sw" / "rmse_vs_eps.csv")) == 1 + 3 * 2);

  const auto grid = edited(dir, "toa", [](ojson& j) {
    j["experiment"]["runs"] = 2;
    j["experiment"]["spatial_grid"] = {{"x_min", -5}, {"x_max", 5}, {"y_min", 0}, {"y_max", 0},
                                       {"nx", 3}, {"ny", 1}};
  });
  REQUIRE(invoke({"experiment", grid.string(), "--kind", "spatial", "--out", (dir / "sp").string()}).code == 0);
  const std::string spatial = slurp(dir / "sp" / "spatial_grid.csv");
  CHECK(spatial.rfind("x,y,rmse_standard,rmse_robust,rmse_huber\n", 0) == 0);
  CHECK(lines(spatial) == 4);

  CHECK(invoke({"experiment", small.string(), "--kind", "histogram", "--out", (dir / "h").string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("experiment exits 1 when the failure budget is exceeded") {
  const auto dir = support::scratch_dir("cli_budget");
  const auto cfg = edited(dir, "toa", [](ojson& j) {
    j["sequences"] = {{"s0", {1, 5, 7}}};
    j["experiment"]["n"] = 1;
    j["experiment"]["runs"] = 3;
    j["experiment"]["methods"] = {"huber"};
  });
  const Outcome o = invoke({"experiment", cfg.string(), "--kind", "cdf", "--out", (dir / "o").string()});
  CHECK(o.code == 1);
  const ojson manifest = ojson::parse(slurp(dir / "o" / "manifest.json"));
  CHECK(manifest["within_failure_budget"] == false);
  fs::remove_all(dir);
}

TEST_CASE("the installed binary follows the exit-code contract") {
  const auto dir = support::scratch_dir("cli_bin");
  const std::string bin = ROBUSTLOC_BIN;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const auto data = (dir / "d.csv").string();
  CHECK(status(bin + " simulate " + scenario_path("toa") + " " + data) == 0);
  CHECK(status(bin + " localize " + data + " --method huber") == 0);
  CHECK(status(bin + " experiment " + scenario_path("toa") + " --kind nope --out " +
               (dir / "x").string()) == 2);
  CHECK(status("ROBUSTLOC_LOG=debug " + bin + " localize " + data) == 0);
  fs::remove_all(dir);
}
