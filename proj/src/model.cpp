#include "robustloc/model.hpp"

#include "robustloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace robustloc {

std::string_view to_string(Technique technique) {
  switch (technique) {
    case Technique::TOA: return "TOA";
    case Technique::TDOA: return "TDOA";
    case Technique::TDST: return "TDST";
  }
  return "?";
}

Technique technique_from_string(std::string_view name) {
  if (name == "TOA") return Technique::TOA;
  if (name == "TDOA") return Technique::TDOA;
  if (name == "TDST") return Technique::TDST;
  throw Error(ErrorCode::InvalidArgument, "unknown technique '" + std::string(name) + "'");
}

void Network::validate() const {
  if (dim != 2 && dim != 3) {
    throw Error(ErrorCode::InvalidNetwork, "dim must be 2 or 3, got " + std::to_string(dim));
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::InvalidNetwork, "propagation speed c must be positive");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::InvalidNetwork, "delta must be non-negative");
  }
  if (num_aux < 0) {
    throw Error(ErrorCode::InvalidNetwork, "num_aux must be non-negative");
  }
  if (node_count() < 1) {
    throw Error(ErrorCode::InvalidNetwork, "network needs at least one transmitting node");
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].size() != dim || !anchors[i].allFinite()) {
      throw Error(ErrorCode::InvalidNetwork,
                  "anchor " + std::to_string(i) + " must be a finite " + std::to_string(dim) +
                      "-vector");
    }
  }
}

Theta::Theta(int dim, int unknowns)
    : coords_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim) * unknowns)), dim_(dim) {}

Theta::Theta(Eigen::VectorXd coords, int dim) : coords_(std::move(coords)), dim_(dim) {
  if (dim_ <= 0 || coords_.size() % dim_ != 0) {
    throw Error(ErrorCode::InvalidArgument, "theta length is not a multiple of dim");
  }
}

Theta Theta::from_points(const std::vector<Eigen::VectorXd>& points) {
  if (points.empty()) {
    throw Error(ErrorCode::InvalidArgument, "theta needs at least one point");
  }
  const int dim = static_cast<int>(points.front().size());
  Theta theta(dim, static_cast<int>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != dim) {
      throw Error(ErrorCode::InvalidArgument, "theta points have mixed dimensions");
    }
    theta.node(static_cast<int>(k)) = points[k];
  }
  return theta;
}

std::vector<Eigen::VectorXd> Theta::points() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(unknowns()));
  for (int k = 0; k < unknowns(); ++k) out.emplace_back(node(k));
  return out;
}

int Sequence::rows() const {
  const int len = static_cast<int>(nodes.size());
  if (technique == Technique::TOA) return len;
  return len > 0 ? len - 1 : 0;
}

void Sequence::validate(int node_count) const {
  const std::size_t min_len = technique == Technique::TOA ? 1 : 2;
  if (nodes.size() < min_len) {
    throw Error(ErrorCode::InvalidSequence,
                std::string(to_string(technique)) + " sequence needs at least " +
                    std::to_string(min_len) + " nodes");
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] < 1 || nodes[k] > node_count) {
      throw Error(ErrorCode::InvalidSequence,
                  "sequence node " + std::to_string(nodes[k]) + " outside [1, " +
                      std::to_string(node_count) + "]");
    }
    if (technique != Technique::TOA && k > 0 && nodes[k] == nodes[k - 1]) {
      throw Error(ErrorCode::InvalidSequence,
                  "consecutive repeated node " + std::to_string(nodes[k]) + " in sequence");
    }
  }
  if (delta && !(*delta >= 0.0)) {
    throw Error(ErrorCode::InvalidSequence, "sequence delta must be non-negative");
  }
}

std::size_t rho_size(int node_count) {
  const auto n = static_cast<std::size_t>(node_count);
  return n * (n + 1) / 2;
}

// Layout: for i = 1..N in turn, (i,i+1), ..., (i,N), then (i,0).
std::size_t rho_index(NodeId a, NodeId b, int node_count) {
  if (a == b || a < 0 || b < 0 || a > node_count || b > node_count) {
    throw Error(ErrorCode::InvalidPair, "invalid node pair (" + std::to_string(a) + ", " +
                                            std::to_string(b) + ") for N = " +
                                            std::to_string(node_count));
  }
  NodeId lo = a;
  NodeId hi = b;
  if (lo == 0 || (hi != 0 && hi < lo)) std::swap(lo, hi);
  // lo >= 1 is the block owner; hi is either 0 or > lo.
  const auto n = static_cast<std::size_t>(node_count);
  const auto i = static_cast<std::size_t>(lo);
  const std::size_t block = (i - 1) * n - (i - 1) * (i - 2) / 2;
  const std::size_t within = hi == 0 ? n - i : static_cast<std::size_t>(hi) - i - 1;
  return block + within;
}

Eigen::VectorXd node_position(const Network& net, const Theta& theta, NodeId node) {
  if (net.is_unknown(node)) return theta.node(node);
  return net.anchor(node);
}

Eigen::VectorXd build_rho(const Theta& theta, const Network& net) {
  const int n = net.node_count();
  Eigen::VectorXd rho(static_cast<Eigen::Index>(rho_size(n)));
  for (NodeId i = 1; i <= n; ++i) {
    const Eigen::VectorXd xi = node_position(net, theta, i);
    for (NodeId j = i + 1; j <= n; ++j) {
      rho(static_cast<Eigen::Index>(rho_index(i, j, n))) =
          (xi - node_position(net, theta, j)).norm();
    }
    rho(static_cast<Eigen::Index>(rho_index(i, 0, n))) = (xi - theta.node(0)).norm();
  }
  return rho;
}

SelectionRows selection_rows(const Sequence& seq, int node_count) {
  seq.validate(node_count);
  SelectionRows rows;
  rows.reserve(static_cast<std::size_t>(seq.rows()));
  const auto& s = seq.nodes;
  switch (seq.technique) {
    case Technique::TOA:
      for (NodeId i : s) rows.push_back({{2, i, 0}});
      break;
    case Technique::TDOA:
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        rows.push_back({{-1, s[k], 0}, {1, s[k + 1], 0}});
      }
      break;
    case Technique::TDST:
      for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        rows.push_back({{1, s[k], s[k + 1]}, {-1, s[k], 0}, {1, s[k + 1], 0}});
      }
      break;
  }
  return rows;
}

SelectionMatrix build_selection_matrix(const Sequence& seq, int node_count) {
  const SelectionRows rows = selection_rows(seq, node_count);
  SelectionMatrix m = SelectionMatrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(rho_size(node_count)));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& term : rows[r]) {
      m(static_cast<Eigen::Index>(r),
        static_cast<Eigen::Index>(rho_index(term.a, term.b, node_count))) += term.coef;
    }
  }
  return m;
}

namespace {

Eigen::VectorXd predict_rows(const SelectionRows& rows, double delta, const Theta& theta,
                             const Network& net) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double sum = 0.0;
    for (const auto& term : rows[r]) {
      sum += term.coef *
             (node_position(net, theta, term.a) - node_position(net, theta, term.b)).norm();
    }
    mu(static_cast<Eigen::Index>(r)) = sum / net.c + delta;
  }
  return mu;
}

Eigen::MatrixXd jacobian_rows(const SelectionRows& rows, const Theta& theta, const Network& net) {
  const int dim = net.dim;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), theta.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& term : rows[r]) {
      const bool a_free = net.is_unknown(term.a);
      const bool b_free = net.is_unknown(term.b);
      if (!a_free && !b_free) continue;
      const Eigen::VectorXd diff =
          node_position(net, theta, term.a) - node_position(net, theta, term.b);
      const double dist = diff.norm();
      if (dist == 0.0) {
        throw Error(ErrorCode::SingularGeometry,
                    "nodes " + std::to_string(term.a) + " and " + std::to_string(term.b) +
                        " coincide; distance gradient is undefined");
      }
      const Eigen::VectorXd g = (term.coef / (net.c * dist)) * diff;
      const auto row = static_cast<Eigen::Index>(r);
      if (a_free) jac.block(row, static_cast<Eigen::Index>(term.a) * dim, 1, dim) += g.transpose();
      if (b_free) jac.block(row, static_cast<Eigen::Index>(term.b) * dim, 1, dim) -= g.transpose();
    }
  }
  return jac;
}

void check_theta(const Theta& theta, const Network& net) {
  if (theta.dim() != net.dim || theta.unknowns() != net.unknown_count()) {
    throw Error(ErrorCode::InvalidArgument,
                "theta layout does not match network (expected " +
                    std::to_string(net.unknown_count()) + " unknowns of dim " +
                    std::to_string(net.dim) + ")");
  }
}

}  // namespace

Eigen::VectorXd predict(const Sequence& seq, const Theta& theta, const Network& net) {
  check_theta(theta, net);
  return predict_rows(selection_rows(seq, net.node_count()), seq.delta.value_or(net.delta),
                      theta, net);
}

Eigen::MatrixXd jacobian(const Sequence& seq, const Theta& theta, const Network& net) {
  check_theta(theta, net);
  return jacobian_rows(selection_rows(seq, net.node_count()), theta, net);
}

namespace {

// Affine span of the anchors used by the sequences must cover R^d.
bool anchors_span_space(const Network& net, std::span<const Sequence> sequences) {
  std::vector<NodeId> used;
  for (const auto& seq : sequences) {
    for (NodeId node : seq.nodes) {
      if (!net.is_unknown(node) && std::find(used.begin(), used.end(), node) == used.end()) {
        used.push_back(node);
      }
    }
  }
  if (static_cast<int>(used.size()) < net.dim + 1) return false;
  Eigen::MatrixXd spread(net.dim, static_cast<Eigen::Index>(used.size()) - 1);
  const Eigen::VectorXd& origin = net.anchor(used.front());
  for (std::size_t k = 1; k < used.size(); ++k) {
    spread.col(static_cast<Eigen::Index>(k) - 1) = net.anchor(used[k]) - origin;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(spread);
  const auto& sv = svd.singularValues();
  return sv(0) > 0.0 && sv(sv.size() - 1) > 1e-8 * sv(0);
}

}  // namespace

Identifiability check_identifiability(const Network& net, std::span<const Sequence> sequences,
                                      const Theta& theta) {
  Identifiability out;
  if (sequences.empty()) return out;
  check_theta(theta, net);

  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index total_rows = 0;
  try {
    for (const auto& seq : sequences) {
      blocks.push_back(jacobian(seq, theta, net));
      total_rows += blocks.back().rows();
    }
  } catch (const Error&) {
    return out;
  }

  Eigen::MatrixXd stacked(total_rows, theta.size());
  Eigen::Index offset = 0;
  for (const auto& block : blocks) {
    stacked.middleRows(offset, block.rows()) = block;
    offset += block.rows();
  }
  // Scale by c so singular values are in metres per metre, not seconds.
  stacked *= net.c;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return out;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-8 * sv(0)) ++out.rank;
  }
  const double smallest = sv.size() < theta.size() ? 0.0 : sv(sv.size() - 1);
  out.condition_number =
      smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  out.identifiable = out.rank == theta.size() && anchors_span_space(net, sequences);
  return out;
}

MeasurementModel::MeasurementModel(const Network& net, std::span<const Sequence> sequences)
    : net_(net) {
  net_.validate();
  rows_.reserve(sequences.size());
  for (const auto& seq : sequences) {
    rows_.push_back(selection_rows(seq, net_.node_count()));
    delta_.push_back(seq.delta.value_or(net_.delta));
  }
}

Eigen::VectorXd MeasurementModel::predict(std::size_t seq_id, const Theta& theta) const {
  return predict_rows(rows_[seq_id], delta_[seq_id], theta, net_);
}

Eigen::MatrixXd MeasurementModel::jacobian(std::size_t seq_id, const Theta& theta) const {
  return jacobian_rows(rows_[seq_id], theta, net_);
}

}  // namespace robustloc
