#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace robustloc {

constexpr double kSpeedOfLight = 299792458.0;

// Node 0 is the self-localizing node, nodes 1..num_aux are auxiliary nodes
// with unknown positions, nodes num_aux+1..N are anchors.
using NodeId = int;

enum class Technique { TOA, TDOA, TDST };

std::string_view to_string(Technique technique);
Technique technique_from_string(std::string_view name);

struct Network {
  std::vector<Eigen::VectorXd> anchors;
  int num_aux = 0;
  int dim = 2;
  double c = kSpeedOfLight;  // m/s
  double delta = 0.0;        // s

  int node_count() const { return num_aux + static_cast<int>(anchors.size()); }
  int unknown_count() const { return num_aux + 1; }
  bool is_unknown(NodeId node) const { return node <= num_aux; }

  const Eigen::VectorXd& anchor(NodeId node) const {
    return anchors[static_cast<std::size_t>(node - num_aux - 1)];
  }

  void validate() const;
};

/// Flattened unknown positions (x_0, x_1, ..., x_{num_aux}), each `dim` long.
class Theta {
 public:
  Theta() = default;
  Theta(int dim, int unknowns);
  Theta(Eigen::VectorXd coords, int dim);

  static Theta from_points(const std::vector<Eigen::VectorXd>& points);

  int dim() const { return dim_; }
  int unknowns() const { return dim_ == 0 ? 0 : static_cast<int>(coords_.size()) / dim_; }
  Eigen::Index size() const { return coords_.size(); }

  const Eigen::VectorXd& coords() const { return coords_; }
  Eigen::VectorXd& coords() { return coords_; }

  auto node(int k) const { return coords_.segment(static_cast<Eigen::Index>(k) * dim_, dim_); }
  auto node(int k) { return coords_.segment(static_cast<Eigen::Index>(k) * dim_, dim_); }

  std::vector<Eigen::VectorXd> points() const;

  bool operator==(const Theta& other) const {
    return dim_ == other.dim_ && coords_ == other.coords_;
  }

 private:
  Eigen::VectorXd coords_;
  int dim_ = 0;
};

struct Sequence {
  std::vector<NodeId> nodes;
  Technique technique = Technique::TDOA;
  std::optional<double> delta;  // per-sequence override of Network::delta (s)

  /// Number of interarrival measurements this sequence produces.
  int rows() const;
  void validate(int node_count) const;
};

/// One signed distance term, coef * ||x_a - x_b||, of a selection-matrix row.
struct DistanceTerm {
  int coef = 0;
  NodeId a = 0;
  NodeId b = 0;
};

using SelectionRows = std::vector<std::vector<DistanceTerm>>;
using SelectionMatrix = Eigen::MatrixXi;

std::size_t rho_size(int node_count);
std::size_t rho_index(NodeId a, NodeId b, int node_count);

Eigen::VectorXd node_position(const Network& net, const Theta& theta, NodeId node);

Eigen::VectorXd build_rho(const Theta& theta, const Network& net);

/// Sparse row form of M(s); build_selection_matrix() scatters it into ρ layout.
SelectionRows selection_rows(const Sequence& seq, int node_count);
SelectionMatrix build_selection_matrix(const Sequence& seq, int node_count);

Eigen::VectorXd predict(const Sequence& seq, const Theta& theta, const Network& net);
Eigen::MatrixXd jacobian(const Sequence& seq, const Theta& theta, const Network& net);

struct Identifiability {
  bool identifiable = false;
  int rank = 0;
  double condition_number = 0.0;
};

Identifiability check_identifiability(const Network& net, std::span<const Sequence> sequences,
                                      const Theta& theta);

/// Precompiled selection rows for a fixed network and sequence set. The solver
/// evaluates predictions and Jacobians through this to avoid rebuilding rows.
class MeasurementModel {
 public:
  MeasurementModel(const Network& net, std::span<const Sequence> sequences);

  const Network& network() const { return net_; }
  std::size_t sequence_count() const { return rows_.size(); }
  int rows(std::size_t seq_id) const { return static_cast<int>(rows_[seq_id].size()); }

  Eigen::VectorXd predict(std::size_t seq_id, const Theta& theta) const;
  Eigen::MatrixXd jacobian(std::size_t seq_id, const Theta& theta) const;

 private:
  Network net_;
  std::vector<SelectionRows> rows_;
  std::vector<double> delta_;
};

}  // namespace robustloc
