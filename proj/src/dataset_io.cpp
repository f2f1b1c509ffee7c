#include "robustloc/config.hpp"
#include "robustloc/error.hpp"
#include "robustloc/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace robustloc {

namespace {

constexpr const char* kFormat = "robustloc-dataset";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorCode::Io, where + ": cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  std::size_t width = 0;
  for (const auto& s : data.samples) width = std::max(width, static_cast<std::size_t>(s.y.size()));
  out << "sample_id,seq_id,corrupted";
  for (std::size_t k = 0; k < width; ++k) out << ",y_" << k;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    out << i << ',' << s.seq_id << ',' << (s.corrupted ? 1 : 0);
    for (std::size_t k = 0; k < width; ++k) {
      out << ',';
      if (static_cast<Eigen::Index>(k) < s.y.size()) {
        std::snprintf(buf, sizeof buf, "%.17e", s.y(static_cast<Eigen::Index>(k)));
        out << buf;
      }
    }
    out << '\n';
  }
}

void write_dataset(const std::filesystem::path& csv_path, const Dataset& data) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + csv_path.string() + "'");
    write_dataset_csv(out, data);
  }
  ojson side;
  side["format"] = kFormat;
  side["version"] = 1;
  side["seed"] = data.seed;
  side["rng"] = data.rng_algorithm;
  side["n"] = data.samples.size();
  side["technique"] = std::string(to_string(data.technique()));
  side["network"] = network_to_json(data.network);
  side["sequences"] = sequences_to_json(data.sequences, data.sequence_names);
  if (data.theta_star) side["theta_star"] = theta_to_json(*data.theta_star);
  side["noise"] = noise_to_json(data.noise);

  const auto path = sidecar_path(csv_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << side.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
  const auto side_path = sidecar_path(csv_path);
  const ojson side = parse_json_text(read_text_file(side_path), side_path.string());
  if (!side.is_object() || side.value("format", "") != kFormat) {
    throw Error(ErrorCode::Io, side_path.string() + ": not a dataset sidecar");
  }

  Dataset data;
  data.seed = side.at("seed").get<std::uint64_t>();
  data.rng_algorithm = side.at("rng").get<std::string>();
  data.network = network_from_json(side.at("network"));
  const Technique technique = technique_from_string(side.at("technique").get<std::string>());
  sequences_from_json(side.at("sequences"), technique, data.sequences, data.sequence_names);
  if (side.contains("theta_star")) data.theta_star = theta_from_json(side["theta_star"], "theta_star");
  data.noise = noise_from_json(side.at("noise"));

  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + csv_path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_id,seq_id,corrupted", 0) != 0) {
    throw Error(ErrorCode::Io, csv_path.string() + ": missing dataset header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = csv_path.string() + ":" + std::to_string(line_no);
    const auto cells = split_csv(line);
    if (cells.size() < 3) throw Error(ErrorCode::Io, where + ": too few columns");
    Sample s;
    s.seq_id = static_cast<std::size_t>(parse_double(cells[1], where));
    s.corrupted = cells[2] == "1";
    if (s.seq_id >= data.sequences.size()) {
      throw Error(ErrorCode::Io, where + ": unknown sequence id");
    }
    const int m = data.sequences[s.seq_id].rows();
    if (static_cast<int>(cells.size()) < 3 + m) {
      throw Error(ErrorCode::Io, where + ": too few measurements");
    }
    s.y.resize(m);
    for (int k = 0; k < m; ++k) {
      s.y(k) = parse_double(cells[static_cast<std::size_t>(3 + k)], where);
    }
    data.samples.push_back(std::move(s));
  }
  data.validate();
  return data;
}

}  // namespace robustloc
