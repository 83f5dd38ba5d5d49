#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fade/rng.hpp"

namespace fade {

/// Thrown when an operation requires global observability but the stacked
/// sensing matrix is rank deficient.
struct ObservabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++rank;
  return rank;
}

}  // namespace detail

/// Immutable collection of per-agent sensing matrices H_n (d_n x d) together
/// with derived quantities: the stacked matrix, the normalized Gram matrix
/// G = (1/N) sum_n H_n' H_n, and, when G is invertible, the innovation gains
/// C_n = G^{-1} H_n'. Models with a singular Gram matrix still construct
/// (so they can be inspected and validated); only gain access throws.
class SensingModel {
 public:
  explicit SensingModel(std::vector<Eigen::MatrixXd> sensing)
      : sensing_(std::move(sensing)) {
    if (sensing_.size() < 2)
      throw std::invalid_argument("sensing model needs at least 2 agents");
    dim_ = static_cast<int>(sensing_[0].cols());
    if (dim_ < 1) throw std::invalid_argument("parameter dimension must be >= 1");
    total_obs_ = 0;
    for (const auto& h : sensing_) {
      if (h.cols() != dim_)
        throw std::invalid_argument("all sensing matrices must share the parameter dimension");
      if (h.rows() < 1)
        throw std::invalid_argument("each agent needs at least one observation row");
      total_obs_ += static_cast<int>(h.rows());
    }
    stacked_.resize(total_obs_, dim_);
    int row = 0;
    for (const auto& h : sensing_) {
      stacked_.middleRows(row, h.rows()) = h;
      row += static_cast<int>(h.rows());
    }
    gram_ = stacked_.transpose() * stacked_ / static_cast<double>(agents());
    if (detail::numerical_rank(stacked_, kRankTol) == dim_) {
      Eigen::LLT<Eigen::MatrixXd> llt(gram_);
      gains_.reserve(sensing_.size());
      for (const auto& h : sensing_) gains_.push_back(llt.solve(h.transpose()));
    }
  }

  int agents() const { return static_cast<int>(sensing_.size()); }
  int dim() const { return dim_; }
  int obs_dim(int n) const { return static_cast<int>(sensing_[n].rows()); }
  int total_obs_dim() const { return total_obs_; }

  const Eigen::MatrixXd& sensing(int n) const { return sensing_[n]; }
  const std::vector<Eigen::MatrixXd>& sensing() const { return sensing_; }
  const Eigen::MatrixXd& stacked() const { return stacked_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// True when the stacked sensing matrix has full column rank, i.e. the
  /// network as a whole can identify the parameter.
  bool observable() const { return !gains_.empty(); }

  const Eigen::MatrixXd& gain(int n) const {
    require_observable();
    return gains_[n];
  }
  const std::vector<Eigen::MatrixXd>& gains() const {
    require_observable();
    return gains_;
  }

  static constexpr double kRankTol = 1e-10;

 private:
  void require_observable() const {
    if (gains_.empty())
      throw ObservabilityError(
          "stacked sensing matrix is rank deficient; innovation gains are undefined");
  }

  std::vector<Eigen::MatrixXd> sensing_;
  std::vector<Eigen::MatrixXd> gains_;
  Eigen::MatrixXd stacked_;
  Eigen::MatrixXd gram_;
  int dim_ = 0;
  int total_obs_ = 0;
};

/// Global observability: rank of the stacked sensing matrix equals the
/// parameter dimension, with singular values below tol * sigma_max treated
/// as zero.
inline bool check_global_observability(const SensingModel& model,
                                       double tol = SensingModel::kRankTol) {
  return detail::numerical_rank(model.stacked(), tol) == model.dim();
}

/// Recomputes the innovation gains C_n = G^{-1} H_n'. These satisfy
/// (1/N) sum_n C_n H_n = I exactly (up to rounding), which is what makes the
/// distributed innovation updates unbiased.
inline std::vector<Eigen::MatrixXd> build_gains(const SensingModel& model) {
  if (!check_global_observability(model))
    throw ObservabilityError(
        "stacked sensing matrix is rank deficient; innovation gains are undefined");
  Eigen::LLT<Eigen::MatrixXd> llt(model.gram());
  std::vector<Eigen::MatrixXd> gains;
  gains.reserve(model.agents());
  for (int n = 0; n < model.agents(); ++n)
    gains.push_back(llt.solve(model.sensing(n).transpose()));
  return gains;
}

/// One network observation y_n(t) = H_n theta + v_n(t) for every agent.
struct Measurement {
  std::vector<Eigen::VectorXd> per_agent;
  int time_step = 0;
};

/// Draws the per-agent observations at time t. Noise components are iid
/// standard normal scaled by noise_scale, consumed agent by agent in index
/// order so that a fixed seed yields a fixed measurement sequence.
inline Measurement sample_measurement(const SensingModel& model,
                                      const Eigen::VectorXd& theta, Rng& rng,
                                      int t, double noise_scale = 1.0) {
  if (theta.size() != model.dim())
    throw std::invalid_argument("theta dimension does not match the model");
  Measurement m;
  m.time_step = t;
  m.per_agent.reserve(model.agents());
  for (int n = 0; n < model.agents(); ++n) {
    Eigen::VectorXd y = model.sensing(n) * theta;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise_scale * rng.gaussian();
    m.per_agent.push_back(std::move(y));
  }
  return m;
}

/// Returns a copy of the model with one column of one agent's sensing matrix
/// zeroed out, making that agent locally blind to the given coordinate.
/// Indices are 0-based.
inline SensingModel blind_agent_coordinate(const SensingModel& model, int agent,
                                           int coord) {
  if (agent < 0 || agent >= model.agents())
    throw std::invalid_argument("blind agent index out of range");
  if (coord < 0 || coord >= model.dim())
    throw std::invalid_argument("blind coordinate index out of range");
  std::vector<Eigen::MatrixXd> sensing = model.sensing();
  sensing[agent].col(coord).setZero();
  return SensingModel(std::move(sensing));
}

/// Generates a random model in which every H_n = A_n B_n is d_n x d of rank
/// at most `rank` (A_n is d_n x rank, B_n is rank x d, iid standard normal).
/// Redraws until the stacked matrix has full column rank, so every agent is
/// locally rank deficient when rank < d yet the network is observable.
inline SensingModel generate_random_model(int agents, int dim, int obs_dim,
                                          int rank, Rng& rng,
                                          int max_retries = 1000) {
  if (agents < 2) throw std::invalid_argument("model generation needs at least 2 agents");
  if (dim < 1 || obs_dim < 1) throw std::invalid_argument("dimensions must be positive");
  if (rank < 1 || rank > std::min(obs_dim, dim))
    throw std::invalid_argument("rank must lie in [1, min(obs_dim, dim)]");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<Eigen::MatrixXd> sensing;
    sensing.reserve(agents);
    for (int n = 0; n < agents; ++n) {
      Eigen::MatrixXd a(obs_dim, rank), b(rank, dim);
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.gaussian();
      for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = rng.gaussian();
      sensing.push_back(a * b);
    }
    SensingModel model(std::move(sensing));
    if (check_global_observability(model)) return model;
  }
  throw std::runtime_error("failed to draw a globally observable model (agents=" +
                           std::to_string(agents) + ", dim=" + std::to_string(dim) +
                           ", rank=" + std::to_string(rank) + ")");
}

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] inline void parse_fail(const std::string& what) {
  throw std::runtime_error("model file: " + what);
}

}  // namespace detail

/// Text serialization. Header line "N d", then for each agent a line
/// "n d_n" (n is 1-based) followed by d_n rows of d entries. Values are
/// written with 17 significant digits so that save/load round-trips bit
/// exactly.
inline void save_model(std::ostream& os, const SensingModel& model) {
  os << model.agents() << ' ' << model.dim() << '\n';
  for (int n = 0; n < model.agents(); ++n) {
    const auto& h = model.sensing(n);
    os << (n + 1) << ' ' << h.rows() << '\n';
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        if (j) os << ' ';
        os << detail::format_g17(h(i, j));
      }
      os << '\n';
    }
  }
}

inline SensingModel load_model(std::istream& is) {
  int agents = 0, dim = 0;
  if (!(is >> agents >> dim)) detail::parse_fail("missing 'N d' header");
  if (agents < 2 || dim < 1) detail::parse_fail("invalid header values");
  std::vector<Eigen::MatrixXd> sensing;
  sensing.reserve(agents);
  for (int n = 0; n < agents; ++n) {
    int idx = 0, rows = 0;
    if (!(is >> idx >> rows)) detail::parse_fail("missing agent block header");
    if (idx != n + 1) detail::parse_fail("agent blocks must appear in order 1..N");
    if (rows < 1) detail::parse_fail("agent observation dimension must be >= 1");
    Eigen::MatrixXd h(rows, dim);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < dim; ++j)
        if (!(is >> h(i, j))) detail::parse_fail("truncated sensing matrix");
    sensing.push_back(std::move(h));
  }
  return SensingModel(std::move(sensing));
}

inline void save_model(const std::filesystem::path& path, const SensingModel& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_model(os, model);
}

inline SensingModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file " + path.string());
  return load_model(is);
}

}  // namespace fade
