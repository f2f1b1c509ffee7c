#include "robustloc/sim.hpp"

#include "robustloc/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace robustloc {

std::string_view to_string(QStyle style) {
  switch (style) {
    case QStyle::Identity: return "identity";
    case QStyle::AdjacentThird: return "adjacent_third";
    case QStyle::FullThird: return "full_third";
  }
  return "?";
}

std::string_view to_string(Mixing mixing) {
  return mixing == Mixing::Bernoulli ? "bernoulli" : "fixed_count";
}

QStyle q_style_from_string(std::string_view name) {
  if (name == "identity") return QStyle::Identity;
  if (name == "adjacent_third") return QStyle::AdjacentThird;
  if (name == "full_third") return QStyle::FullThird;
  throw Error(ErrorCode::InvalidArgument, "unknown q_style '" + std::string(name) + "'");
}

Mixing mixing_from_string(std::string_view name) {
  if (name == "bernoulli") return Mixing::Bernoulli;
  if (name == "fixed_count") return Mixing::FixedCount;
  throw Error(ErrorCode::InvalidArgument, "unknown mixing '" + std::string(name) + "'");
}

void NoiseSpec::validate() const {
  if (!(sigma_los > 0.0) || !std::isfinite(sigma_los)) {
    throw Error(ErrorCode::InvalidArgument, "sigma_los must be positive");
  }
  if (!(mu_nlos >= 0.0) || !std::isfinite(mu_nlos)) {
    throw Error(ErrorCode::InvalidArgument, "mu_nlos must be non-negative");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1)");
  }
}

Eigen::MatrixXd build_q(int m, QStyle style) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "Q needs at least one row");
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(m, m);
  switch (style) {
    case QStyle::Identity:
      break;
    case QStyle::AdjacentThird:
      for (int i = 0; i + 1 < m; ++i) {
        q(i, i + 1) = 1.0 / 3.0;
        q(i + 1, i) = 1.0 / 3.0;
      }
      break;
    case QStyle::FullThird:
      q.setConstant(1.0 / 3.0);
      q.diagonal().setOnes();
      break;
  }
  return q;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  return r * std::cos(angle);
}

double Rng::exponential(double mean) {
  return -mean * std::log(1.0 - uniform());
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "cannot draw from an empty range");
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t x = engine_();
  while (x < threshold) x = engine_();
  return static_cast<std::size_t>(x % bound);
}

namespace {

Eigen::MatrixXd q_cholesky(int m, QStyle style) {
  Eigen::LLT<Eigen::MatrixXd> llt(build_q(m, style));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidQ, "Q is not positive definite");
  }
  return llt.matrixL();
}

Eigen::VectorXd los_noise(const Eigen::MatrixXd& chol, double sigma, Rng& rng) {
  Eigen::VectorXd z(chol.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return sigma * (chol * z);
}

Eigen::VectorXd nlos_noise(Eigen::Index m, double mean, Rng& rng) {
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) w(i) = rng.exponential(mean);
  return w;
}

}  // namespace

Eigen::VectorXd sample_los(const Sequence& seq, const Theta& theta_star, const Network& net,
                           const NoiseSpec& noise, Rng& rng) {
  const Eigen::VectorXd mu = predict(seq, theta_star, net);
  return mu + los_noise(q_cholesky(static_cast<int>(mu.size()), noise.q_style), noise.sigma_los,
                        rng);
}

Eigen::VectorXd sample_nlos(const Sequence& seq, const Theta& theta_star, const Network& net,
                            const NoiseSpec& noise, Rng& rng) {
  if (!(noise.mu_nlos > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "NLOS sampling needs mu_nlos > 0");
  }
  const Eigen::VectorXd mu = predict(seq, theta_star, net);
  return mu + nlos_noise(mu.size(), noise.mu_nlos, rng);
}

Technique Dataset::technique() const {
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no sequences");
  return sequences.front().technique;
}

void Dataset::validate() const {
  network.validate();
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no samples");
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no sequences");
  for (const auto& seq : sequences) {
    seq.validate(network.node_count());
    if (seq.technique != sequences.front().technique) {
      throw Error(ErrorCode::InvalidSequence, "sequences mix localization techniques");
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.seq_id >= sequences.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "sample " + std::to_string(i) + " references unknown sequence");
    }
    if (s.y.size() != sequences[s.seq_id].rows()) {
      throw Error(ErrorCode::InvalidArgument,
                  "sample " + std::to_string(i) + " has wrong measurement length");
    }
  }
  if (theta_star && (theta_star->dim() != network.dim ||
                     theta_star->unknowns() != network.unknown_count())) {
    throw Error(ErrorCode::InvalidArgument, "theta_star does not match the network");
  }
}

Dataset generate(const Network& net, const std::vector<Sequence>& sequences,
                 const Theta& theta_star, const NoiseSpec& noise, std::size_t n,
                 std::uint64_t seed) {
  net.validate();
  noise.validate();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "dataset size must be at least 1");
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "no sequences to draw from");

  Dataset data;
  data.network = net;
  data.sequences = sequences;
  data.theta_star = theta_star;
  data.seed = seed;
  data.noise = noise;

  // Ideal means and Cholesky factors are fixed per sequence.
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& seq : sequences) {
    means.push_back(predict(seq, theta_star, net));
    factors.push_back(q_cholesky(seq.rows(), noise.q_style));
  }
  if (noise.epsilon > 0.0 && !(noise.mu_nlos > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "NLOS sampling needs mu_nlos > 0");
  }

  Rng rng(seed);
  std::vector<bool> chosen(n, false);
  if (noise.mixing == Mixing::FixedCount) {
    const auto k = static_cast<std::size_t>(std::llround(noise.epsilon * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(order[i], order[i + rng.index(n - i)]);
      chosen[order[i]] = true;
    }
  }

  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.seq_id = rng.index(sequences.size());
    s.corrupted = noise.mixing == Mixing::Bernoulli ? rng.uniform() < noise.epsilon : chosen[i];
    const Eigen::VectorXd& mu = means[s.seq_id];
    s.y = s.corrupted ? Eigen::VectorXd(mu + nlos_noise(mu.size(), noise.mu_nlos, rng))
                      : Eigen::VectorXd(mu + los_noise(factors[s.seq_id], noise.sigma_los, rng));
    data.samples.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    data.sequence_names.push_back("s" + std::to_string(k));
  }
  return data;
}

}  // namespace robustloc
