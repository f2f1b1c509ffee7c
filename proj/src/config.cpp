#include "robustloc/config.hpp"

#include "robustloc/error.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace robustloc {

namespace {

constexpr double kNsPerSecond = 1e9;

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::Config, field + ": " + message);
}

double as_number(const ojson& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "must be finite");
  return v;
}

long long as_integer(const ojson& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "expected an integer");
  return j.get<long long>();
}

std::string as_string(const ojson& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected a string");
  return j.get<std::string>();
}

Eigen::VectorXd as_point(const ojson& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "expected a coordinate list");
  Eigen::VectorXd p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    p(static_cast<Eigen::Index>(k)) = as_number(j[k], field + "[" + std::to_string(k) + "]");
  }
  return p;
}

// Object reader that tracks consumed keys so leftovers can be rejected.
class Section {
 public:
  Section(const ojson& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const ojson* find(const std::string& key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  const ojson& require(const std::string& key) {
    const ojson* v = find(key);
    if (v == nullptr) fail(field(key), "missing required field");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const ojson* v = find(key);
    return v ? as_number(*v, field(key)) : fallback;
  }

  long long integer(const std::string& key, long long fallback) {
    const ojson* v = find(key);
    return v ? as_integer(*v, field(key)) : fallback;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const ojson* v = find(key);
    return v ? as_string(*v, field(key)) : fallback;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (used_.count(item.key()) == 0) fail(field(item.key()), "unknown key");
    }
  }

 private:
  const ojson& j_;
  std::string path_;
  std::set<std::string> used_;
};

void check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) fail(field, message);
}

template <typename F>
auto rethrow_as_config(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    fail(field, e.what());
  }
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

LmSettings lm_from_json(const ojson& j) {
  Section s(j, "solver.lm");
  LmSettings lm;
  lm.initial_damping = s.number("initial_damping", lm.initial_damping);
  lm.damping_scale = s.number("damping_scale", lm.damping_scale);
  lm.max_iterations = static_cast<int>(s.integer("max_iterations", lm.max_iterations));
  lm.gradient_tol = s.number("gradient_tol", lm.gradient_tol);
  s.finish();
  check(lm.initial_damping > 0.0, "solver.lm.initial_damping", "must be positive");
  check(lm.damping_scale > 1.0, "solver.lm.damping_scale", "must exceed 1");
  check(lm.max_iterations >= 1, "solver.lm.max_iterations", "must be at least 1");
  check(lm.gradient_tol > 0.0, "solver.lm.gradient_tol", "must be positive");
  return lm;
}

InitSettings init_from_json(const ojson& j) {
  Section s(j, "solver.init");
  InitSettings init;
  const std::string policy = s.string("policy", "grid");
  if (policy == "grid") {
    init.policy = InitPolicy::Grid;
  } else if (policy == "fixed") {
    init.policy = InitPolicy::Fixed;
  } else {
    fail("solver.init.policy", "expected 'grid' or 'fixed'");
  }
  init.grid = static_cast<int>(s.integer("grid", init.grid));
  init.aux_grid = static_cast<int>(s.integer("aux_grid", init.aux_grid));
  if (const ojson* p = s.find("point")) init.fixed = theta_from_json(*p, "solver.init.point");
  s.finish();
  check(init.grid >= 1, "solver.init.grid", "must be at least 1");
  check(init.aux_grid >= 1, "solver.init.aux_grid", "must be at least 1");
  check(init.policy != InitPolicy::Fixed || init.fixed.has_value(), "solver.init.point",
        "required for the fixed policy");
  return init;
}

SolverSettings solver_from_json(const ojson& j) {
  Section s(j, "solver");
  SolverSettings out;
  out.eps_bound = s.number("eps_bound", out.eps_bound);
  out.max_outer = static_cast<int>(s.integer("max_outer", out.max_outer));
  out.outer_tol = s.number("outer_tol", out.outer_tol);
  out.temp_tol = s.number("temp_tol", out.temp_tol);
  if (const ojson* lm = s.find("lm")) out.lm = lm_from_json(*lm);
  if (const ojson* init = s.find("init")) out.init = init_from_json(*init);
  s.finish();
  check(out.eps_bound >= 0.0 && out.eps_bound < 1.0, "solver.eps_bound", "must lie in [0, 1)");
  check(out.max_outer >= 1, "solver.max_outer", "must be at least 1");
  check(out.outer_tol > 0.0, "solver.outer_tol", "must be positive");
  check(out.temp_tol > 0.0, "solver.temp_tol", "must be positive");
  return out;
}

SpatialGrid grid_from_json(const ojson& j) {
  Section s(j, "experiment.spatial_grid");
  SpatialGrid g;
  g.x_min = s.number("x_min", g.x_min);
  g.x_max = s.number("x_max", g.x_max);
  g.y_min = s.number("y_min", g.y_min);
  g.y_max = s.number("y_max", g.y_max);
  g.nx = static_cast<int>(s.integer("nx", g.nx));
  g.ny = static_cast<int>(s.integer("ny", g.ny));
  s.finish();
  check(g.nx >= 1, "experiment.spatial_grid.nx", "must be at least 1");
  check(g.ny >= 1, "experiment.spatial_grid.ny", "must be at least 1");
  return g;
}

void experiment_from_json(const ojson& j, Scenario& out) {
  Section s(j, "experiment");
  out.runs = static_cast<int>(s.integer("runs", out.runs));
  const long long n = s.integer("n", static_cast<long long>(out.n));
  check(n >= 1, "experiment.n", "must be at least 1");
  out.n = static_cast<std::size_t>(n);
  if (const ojson* grid = s.find("eps_grid")) {
    if (!grid->is_array() || grid->empty()) fail("experiment.eps_grid", "expected a non-empty list");
    out.eps_grid.clear();
    for (std::size_t k = 0; k < grid->size(); ++k) {
      const std::string field = "experiment.eps_grid[" + std::to_string(k) + "]";
      const double eps = as_number((*grid)[k], field);
      check(eps >= 0.0 && eps < 1.0, field, "must lie in [0, 1)");
      out.eps_grid.push_back(eps);
    }
  }
  if (const ojson* grid = s.find("spatial_grid")) out.spatial_grid = grid_from_json(*grid);
  out.detect_threshold = s.number("detect_threshold", out.detect_threshold);
  if (const ojson* methods = s.find("methods")) {
    if (!methods->is_array() || methods->empty()) {
      fail("experiment.methods", "expected a non-empty list");
    }
    out.methods.clear();
    for (std::size_t k = 0; k < methods->size(); ++k) {
      const std::string field = "experiment.methods[" + std::to_string(k) + "]";
      out.methods.push_back(
          rethrow_as_config(field, [&] { return method_from_string(as_string((*methods)[k], field)); }));
    }
  }
  s.finish();
  check(out.runs >= 1, "experiment.runs", "must be at least 1");
  check(out.detect_threshold > 0.0, "experiment.detect_threshold", "must be positive");
}

}  // namespace

ojson parse_json_text(std::string_view text, const std::string& source) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorCode::Config, source + ":" + std::to_string(line) + ":" +
                                       std::to_string(col) + ": JSON syntax error: " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Network network_from_json(const ojson& j) {
  Section s(j, "network");
  Network net;
  net.dim = static_cast<int>(s.integer("dim", 2));
  check(net.dim == 2 || net.dim == 3, "network.dim", "must be 2 or 3");
  net.num_aux = static_cast<int>(s.integer("num_aux", 0));
  check(net.num_aux >= 0, "network.num_aux", "must be non-negative");
  net.c = s.number("c", kSpeedOfLight);
  check(net.c > 0.0, "network.c", "must be positive");
  net.delta = s.number("delta_ns", 0.0) / kNsPerSecond;
  check(net.delta >= 0.0, "network.delta_ns", "must be non-negative");
  const ojson& anchors = s.require("anchors");
  if (!anchors.is_array()) fail("network.anchors", "expected a list of coordinates");
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const std::string field = "network.anchors[" + std::to_string(k) + "]";
    Eigen::VectorXd p = as_point(anchors[k], field);
    check(p.size() == net.dim, field, "expected " + std::to_string(net.dim) + " coordinates");
    net.anchors.push_back(std::move(p));
  }
  s.finish();
  check(net.node_count() >= 1, "network.anchors", "network needs at least one transmitting node");
  return net;
}

Theta theta_from_json(const ojson& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "expected a list of points");
  std::vector<Eigen::VectorXd> points;
  for (std::size_t k = 0; k < j.size(); ++k) {
    points.push_back(as_point(j[k], field + "[" + std::to_string(k) + "]"));
  }
  return rethrow_as_config(field, [&] { return Theta::from_points(points); });
}

void sequences_from_json(const ojson& j, Technique technique, std::vector<Sequence>& sequences,
                         std::vector<std::string>& names) {
  if (!j.is_object() || j.empty()) fail("sequences", "expected a non-empty object of named lists");
  for (const auto& item : j.items()) {
    const std::string field = "sequences." + item.key();
    Sequence seq;
    seq.technique = technique;
    const ojson* nodes = &item.value();
    std::optional<Section> section;
    if (item.value().is_object()) {
      section.emplace(item.value(), field);
      nodes = &section->require("nodes");
      if (const ojson* d = section->find("delta_ns")) {
        seq.delta = as_number(*d, field + ".delta_ns") / kNsPerSecond;
        check(*seq.delta >= 0.0, field + ".delta_ns", "must be non-negative");
      }
      section->finish();
    }
    if (!nodes->is_array()) fail(field, "expected a list of node indices");
    for (std::size_t k = 0; k < nodes->size(); ++k) {
      seq.nodes.push_back(
          static_cast<NodeId>(as_integer((*nodes)[k], field + "[" + std::to_string(k) + "]")));
    }
    sequences.push_back(std::move(seq));
    names.push_back(item.key());
  }
}

NoiseSpec noise_from_json(const ojson& j) {
  Section s(j, "noise");
  NoiseSpec noise;
  noise.sigma_los = s.number("sigma_los_ns", 3.0) / kNsPerSecond;
  noise.mu_nlos = s.number("mu_nlos_ns", 75.0) / kNsPerSecond;
  noise.epsilon = s.number("epsilon", noise.epsilon);
  noise.q_style = rethrow_as_config("noise.q_style", [&] {
    return q_style_from_string(s.string("q_style", std::string(to_string(noise.q_style))));
  });
  noise.mixing = rethrow_as_config("noise.mixing", [&] {
    return mixing_from_string(s.string("mixing", std::string(to_string(noise.mixing))));
  });
  s.finish();
  check(noise.sigma_los > 0.0, "noise.sigma_los_ns", "must be positive");
  check(noise.mu_nlos >= 0.0, "noise.mu_nlos_ns", "must be non-negative");
  check(noise.epsilon >= 0.0 && noise.epsilon < 1.0, "noise.epsilon", "must lie in [0, 1)");
  return noise;
}

Scenario parse_config(std::string_view text) {
  const ojson root = parse_json_text(text, "config");
  Section s(root, "");
  Scenario out;

  out.network = network_from_json(s.require("network"));
  out.technique = rethrow_as_config(
      "technique", [&] { return technique_from_string(as_string(s.require("technique"), "technique")); });
  out.theta_star = theta_from_json(s.require("theta_star"), "theta_star");
  check(out.theta_star.dim() == out.network.dim, "theta_star", "dimension differs from network.dim");
  check(out.theta_star.unknowns() == out.network.unknown_count(), "theta_star",
        "expected " + std::to_string(out.network.unknown_count()) + " points (x_0 and auxiliaries)");
  sequences_from_json(s.require("sequences"), out.technique, out.sequences, out.sequence_names);
  for (std::size_t k = 0; k < out.sequences.size(); ++k) {
    rethrow_as_config("sequences." + out.sequence_names[k],
                      [&] { out.sequences[k].validate(out.network.node_count()); });
  }
  if (const ojson* noise = s.find("noise")) {
    out.noise = noise_from_json(*noise);
  } else {
    out.noise.q_style = out.technique == Technique::TOA ? QStyle::Identity : QStyle::AdjacentThird;
  }
  if (const ojson* solver = s.find("solver")) out.solver = solver_from_json(*solver);
  if (out.solver.init.fixed) {
    check(out.solver.init.fixed->dim() == out.network.dim &&
              out.solver.init.fixed->unknowns() == out.network.unknown_count(),
          "solver.init.point", "does not match the network layout");
  }
  if (const ojson* exp = s.find("experiment")) experiment_from_json(*exp, out);
  if (const ojson* seed = s.find("seed")) {
    if (!seed->is_number_unsigned()) fail("seed", "expected a non-negative integer");
    out.seed = seed->get<std::uint64_t>();
  }
  s.finish();

  for (Method m : out.methods) {
    if (m == Method::Huber) {
      check(out.technique == Technique::TOA && out.network.num_aux == 0, "experiment.methods",
            "huber needs TOA data without auxiliary nodes");
    }
  }
  rethrow_as_config("network", [&] { out.network.validate(); });
  return out;
}

Scenario load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_config(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

ExperimentSpec Scenario::experiment_spec() const {
  ExperimentSpec spec;
  spec.network = network;
  spec.theta_star = theta_star;
  spec.sequences = sequences;
  spec.noise = noise;
  spec.n = n;
  spec.runs = runs;
  spec.eps_grid = eps_grid;
  spec.spatial_grid = spatial_grid;
  spec.methods = methods;
  spec.solver = solver;
  spec.huber = huber;
  spec.detect_threshold = detect_threshold;
  spec.base_seed = seed;
  return spec;
}

ojson network_to_json(const Network& net) {
  ojson j;
  j["dim"] = net.dim;
  j["num_aux"] = net.num_aux;
  j["c"] = net.c;
  j["delta_ns"] = net.delta * kNsPerSecond;
  ojson anchors = ojson::array();
  for (const auto& a : net.anchors) anchors.push_back(std::vector<double>(a.data(), a.data() + a.size()));
  j["anchors"] = anchors;
  return j;
}

ojson theta_to_json(const Theta& theta) {
  ojson j = ojson::array();
  for (int k = 0; k < theta.unknowns(); ++k) {
    const Eigen::VectorXd p = theta.node(k);
    j.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  }
  return j;
}

ojson sequences_to_json(const std::vector<Sequence>& sequences,
                        const std::vector<std::string>& names) {
  ojson j = ojson::object();
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    const std::string name = k < names.size() ? names[k] : "s" + std::to_string(k);
    if (sequences[k].delta) {
      j[name] = {{"nodes", sequences[k].nodes}, {"delta_ns", *sequences[k].delta * kNsPerSecond}};
    } else {
      j[name] = sequences[k].nodes;
    }
  }
  return j;
}

ojson noise_to_json(const NoiseSpec& noise) {
  ojson j;
  j["sigma_los_ns"] = noise.sigma_los * kNsPerSecond;
  j["mu_nlos_ns"] = noise.mu_nlos * kNsPerSecond;
  j["epsilon"] = noise.epsilon;
  j["q_style"] = std::string(to_string(noise.q_style));
  j["mixing"] = std::string(to_string(noise.mixing));
  return j;
}

ojson to_json(const Scenario& sc) {
  ojson j;
  j["network"] = network_to_json(sc.network);
  j["technique"] = std::string(to_string(sc.technique));
  j["theta_star"] = theta_to_json(sc.theta_star);
  j["sequences"] = sequences_to_json(sc.sequences, sc.sequence_names);
  j["noise"] = noise_to_json(sc.noise);

  ojson solver;
  solver["eps_bound"] = sc.solver.eps_bound;
  solver["max_outer"] = sc.solver.max_outer;
  solver["outer_tol"] = sc.solver.outer_tol;
  solver["temp_tol"] = sc.solver.temp_tol;
  solver["lm"] = {{"initial_damping", sc.solver.lm.initial_damping},
                  {"damping_scale", sc.solver.lm.damping_scale},
                  {"max_iterations", sc.solver.lm.max_iterations},
                  {"gradient_tol", sc.solver.lm.gradient_tol}};
  ojson init;
  init["policy"] = sc.solver.init.policy == InitPolicy::Grid ? "grid" : "fixed";
  init["grid"] = sc.solver.init.grid;
  init["aux_grid"] = sc.solver.init.aux_grid;
  if (sc.solver.init.fixed) init["point"] = theta_to_json(*sc.solver.init.fixed);
  solver["init"] = init;
  j["solver"] = solver;

  ojson exp;
  exp["runs"] = sc.runs;
  exp["n"] = sc.n;
  exp["eps_grid"] = sc.eps_grid;
  if (sc.spatial_grid) {
    const auto& g = *sc.spatial_grid;
    exp["spatial_grid"] = {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min},
                           {"y_max", g.y_max}, {"nx", g.nx},       {"ny", g.ny}};
  }
  exp["detect_threshold"] = sc.detect_threshold;
  ojson methods = ojson::array();
  for (Method m : sc.methods) methods.push_back(std::string(to_string(m)));
  exp["methods"] = methods;
  j["experiment"] = exp;
  j["seed"] = sc.seed;
  return j;
}

}  // namespace robustloc
