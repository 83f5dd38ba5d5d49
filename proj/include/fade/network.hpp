#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fade/rng.hpp"

namespace fade {

/// Undirected simple graph on {0, ..., N-1}, stored as a sorted list of
/// normalized (a < b) edges. The node count lives with the ensemble (or is
/// passed explicitly) so an edge set can be reused across sizes in tests.
struct EdgeSet {
  std::vector<std::pair<int, int>> edges;

  /// Normalizes orientation, sorts, rejects self-loops and duplicates.
  static EdgeSet from_pairs(std::vector<std::pair<int, int>> pairs) {
    for (auto& e : pairs) {
      if (e.first == e.second)
        throw std::invalid_argument("edge set must not contain self-loops");
      if (e.first > e.second) std::swap(e.first, e.second);
      if (e.first < 0) throw std::invalid_argument("edge endpoints must be non-negative");
    }
    std::sort(pairs.begin(), pairs.end());
    if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end())
      throw std::invalid_argument("edge set must not contain duplicate edges");
    return EdgeSet{std::move(pairs)};
  }

  std::vector<int> degrees(int nodes) const {
    std::vector<int> deg(nodes, 0);
    for (const auto& [a, b] : edges) {
      check_range(a, b, nodes);
      ++deg[a];
      ++deg[b];
    }
    return deg;
  }

  std::vector<std::vector<int>> adjacency(int nodes) const {
    std::vector<std::vector<int>> adj(nodes);
    for (const auto& [a, b] : edges) {
      check_range(a, b, nodes);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    return adj;
  }

  static void check_range(int a, int b, int nodes) {
    if (a < 0 || b >= nodes)
      throw std::invalid_argument("edge endpoint out of range for node count");
  }
};

inline bool is_connected(const EdgeSet& edges, int nodes) {
  if (nodes <= 1) return true;
  const auto adj = edges.adjacency(nodes);
  std::vector<char> seen(nodes, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
  }
  return reached == nodes;
}

/// Finite family of candidate edge sets with strictly positive selection
/// probabilities summing to one. Connectivity of the union is a separate
/// check (check_average_connectivity) so that deliberately broken ensembles
/// can still be constructed and inspected.
class EdgeSetEnsemble {
 public:
  EdgeSetEnsemble(int nodes, std::vector<EdgeSet> sets, std::vector<double> probs)
      : nodes_(nodes), sets_(std::move(sets)), probs_(std::move(probs)) {
    if (nodes_ < 2) throw std::invalid_argument("ensemble needs at least 2 nodes");
    if (sets_.empty()) throw std::invalid_argument("ensemble needs at least one edge set");
    if (probs_.size() != sets_.size())
      throw std::invalid_argument("one probability per edge set required");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p > 0.0))
        throw std::invalid_argument("edge set probabilities must be strictly positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("edge set probabilities must sum to 1");
    for (const auto& s : sets_)
      for (const auto& [a, b] : s.edges) EdgeSet::check_range(a, b, nodes_);
  }

  int nodes() const { return nodes_; }
  int size() const { return static_cast<int>(sets_.size()); }
  const EdgeSet& edge_set(int k) const { return sets_[k]; }
  const std::vector<EdgeSet>& edge_sets() const { return sets_; }
  const std::vector<double>& probs() const { return probs_; }

  /// Union graph over all edge sets.
  EdgeSet union_edges() const {
    std::vector<std::pair<int, int>> all;
    for (const auto& s : sets_)
      all.insert(all.end(), s.edges.begin(), s.edges.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return EdgeSet{std::move(all)};
  }

 private:
  int nodes_;
  std::vector<EdgeSet> sets_;
  std::vector<double> probs_;
};

/// Connectivity on average: every edge set may be disconnected, but the
/// union over the ensemble must form one connected component.
inline bool check_average_connectivity(const EdgeSetEnsemble& ensemble) {
  return is_connected(ensemble.union_edges(), ensemble.nodes());
}

/// Inverse-CDF sampling of the active edge set index, consuming exactly one
/// uniform draw per step.
inline int sample_edge_index(const EdgeSetEnsemble& ensemble, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const auto& p = ensemble.probs();
  for (int k = 0; k < ensemble.size(); ++k) {
    acc += p[k];
    if (u < acc) return k;
  }
  return ensemble.size() - 1;
}

/// Symmetric doubly stochastic mixing matrix together with its sparse form.
/// `rows[n]` lists the nonzero (neighbor, weight) pairs of row n including
/// the diagonal, which is what the estimator steps iterate over; the dense
/// `entries` matrix backs the spectral checks.
struct WeightMatrix {
  Eigen::MatrixXd entries;
  std::vector<std::vector<std::pair<int, double>>> rows;
  int source_edge_set = -1;

  static WeightMatrix from_dense(Eigen::MatrixXd w, int source = -1) {
    WeightMatrix m;
    m.rows.resize(w.rows());
    for (Eigen::Index n = 0; n < w.rows(); ++n)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        if (w(n, j) != 0.0) m.rows[n].emplace_back(static_cast<int>(j), w(n, j));
    m.entries = std::move(w);
    m.source_edge_set = source;
    return m;
  }
};

/// Metropolis weights on a given graph:
///   W_nm = 1 / (1 + max(deg_n, deg_m)) for {n,m} an edge,
///   W_nn = 1 - sum of the off-diagonal row entries, zero elsewhere.
/// The result is symmetric, row stochastic with a strictly positive diagonal,
/// and on a complete graph equals the uniform averaging matrix 11'/N.
inline WeightMatrix metropolis_weights(const EdgeSet& edges, int nodes,
                                       int source_index = -1) {
  const auto deg = edges.degrees(nodes);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(nodes, nodes);
  for (const auto& [a, b] : edges.edges) {
    const double v = 1.0 / (1.0 + std::max(deg[a], deg[b]));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (int n = 0; n < nodes; ++n) w(n, n) = 1.0 - w.row(n).sum();
  return WeightMatrix::from_dense(std::move(w), source_index);
}

/// Checks the structural contract of a mixing matrix against its edge set:
/// symmetry, non-negative entries, rows summing to one, strictly positive
/// diagonal, and off-diagonal sparsity matching the edges exactly.
/// Violations throw std::invalid_argument naming the failed property.
inline void validate_weight_matrix(const WeightMatrix& w, const EdgeSet& edges,
                                   int nodes, double tol = 1e-12) {
  const auto& m = w.entries;
  if (m.rows() != nodes || m.cols() != nodes)
    throw std::invalid_argument("weight matrix has wrong dimensions");
  if (!((m - m.transpose()).cwiseAbs().maxCoeff() <= tol))
    throw std::invalid_argument("weight matrix is not symmetric");
  if (m.minCoeff() < -tol)
    throw std::invalid_argument("weight matrix has negative entries");
  for (int n = 0; n < nodes; ++n) {
    if (std::abs(m.row(n).sum() - 1.0) > tol)
      throw std::invalid_argument("weight matrix rows must sum to 1");
    if (!(m(n, n) > 0.0))
      throw std::invalid_argument("weight matrix diagonal must be strictly positive");
  }
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(nodes, nodes);
  for (const auto& [a, b] : edges.edges) {
    EdgeSet::check_range(a, b, nodes);
    mask(a, b) = mask(b, a) = 1.0;
  }
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j) {
      if (i == j) continue;
      if (mask(i, j) == 0.0 && m(i, j) != 0.0)
        throw std::invalid_argument("weight matrix has a nonzero entry off the edge set");
      if (mask(i, j) != 0.0 && !(m(i, j) > 0.0))
        throw std::invalid_argument("weight matrix misses an edge of its edge set");
    }
}

/// Spectral summary of a weight matrix ensemble.
///   second_eig_bar: second largest absolute eigenvalue of Wbar = sum_k p_k W_k.
///   rho_tilde: spectral radius of sum_k p_k Wtilde_k' Wtilde_k with
///              Wtilde_k = (I - J) W_k (I - J), J = 11'/N.
/// Connectivity on average is equivalent to both being strictly below one;
/// for a disconnected union rho_tilde equals one exactly.
struct SpectralReport {
  double rho_tilde = 1.0;
  double second_eig_bar = 1.0;
  bool connected = false;
};

inline SpectralReport average_matrices(const EdgeSetEnsemble& ensemble,
                                       const std::vector<WeightMatrix>& weights) {
  if (static_cast<int>(weights.size()) != ensemble.size())
    throw std::invalid_argument("one weight matrix per edge set required");
  const int n = ensemble.nodes();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::MatrixXd bar = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd tilde = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < ensemble.size(); ++k) {
    const double p = ensemble.probs()[k];
    bar += p * weights[k].entries;
    const Eigen::MatrixXd wt = centering * weights[k].entries * centering;
    tilde += p * wt.transpose() * wt;
  }
  SpectralReport report;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bar, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    // Drop the eigenvalue closest to 1 (the consensus direction), report the
    // largest remaining magnitude.
    Eigen::Index drop = 0;
    double best = std::abs(ev(0) - 1.0);
    for (Eigen::Index i = 1; i < ev.size(); ++i)
      if (std::abs(ev(i) - 1.0) < best) {
        best = std::abs(ev(i) - 1.0);
        drop = i;
      }
    double second = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (i != drop) second = std::max(second, std::abs(ev(i)));
    report.second_eig_bar = second;
  }
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tilde, Eigen::EigenvaluesOnly);
    report.rho_tilde = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  report.connected = check_average_connectivity(ensemble);
  return report;
}

/// Draws an ensemble of K iid Erdos-Renyi edge sets (each potential edge
/// kept with probability `density`) with uniform selection probabilities,
/// redrawing the whole family until the union graph is connected.
inline EdgeSetEnsemble generate_random_ensemble(int nodes, int num_sets,
                                                double density, Rng& rng,
                                                int max_retries = 1000) {
  if (nodes < 2) throw std::invalid_argument("ensemble needs at least 2 nodes");
  if (num_sets < 1) throw std::invalid_argument("ensemble needs at least one edge set");
  if (!(density > 0.0) || density > 1.0)
    throw std::invalid_argument("edge density must lie in (0, 1]");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<EdgeSet> sets;
    sets.reserve(num_sets);
    for (int k = 0; k < num_sets; ++k) {
      std::vector<std::pair<int, int>> edges;
      for (int a = 0; a < nodes; ++a)
        for (int b = a + 1; b < nodes; ++b)
          if (rng.uniform() < density) edges.emplace_back(a, b);
      sets.push_back(EdgeSet{std::move(edges)});
    }
    std::vector<double> probs(num_sets, 1.0 / num_sets);
    EdgeSetEnsemble ensemble(nodes, std::move(sets), std::move(probs));
    if (check_average_connectivity(ensemble)) return ensemble;
  }
  throw std::runtime_error(
      "failed to draw a connected ensemble after " + std::to_string(max_retries) +
      " attempts (nodes=" + std::to_string(nodes) +
      ", density=" + std::to_string(density) + "); raise the density");
}

namespace detail {

[[noreturn]] inline void ensemble_parse_fail(const std::string& what) {
  throw std::runtime_error("ensemble file: " + what);
}

inline std::string format_prob(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Text serialization. Header "N K", then per edge set a line "k pi_k m"
/// (k 1-based, pi_k with 17 significant digits) followed by m edge lines
/// "a b" with 1-based endpoints. Round-trips bit exactly.
inline void save_ensemble(std::ostream& os, const EdgeSetEnsemble& ensemble) {
  os << ensemble.nodes() << ' ' << ensemble.size() << '\n';
  for (int k = 0; k < ensemble.size(); ++k) {
    const auto& edges = ensemble.edge_set(k).edges;
    os << (k + 1) << ' ' << detail::format_prob(ensemble.probs()[k]) << ' '
       << edges.size() << '\n';
    for (const auto& [a, b] : edges) os << (a + 1) << ' ' << (b + 1) << '\n';
  }
}

inline EdgeSetEnsemble load_ensemble(std::istream& is) {
  int nodes = 0, num_sets = 0;
  if (!(is >> nodes >> num_sets)) detail::ensemble_parse_fail("missing 'N K' header");
  if (nodes < 2 || num_sets < 1) detail::ensemble_parse_fail("invalid header values");
  std::vector<EdgeSet> sets;
  std::vector<double> probs;
  sets.reserve(num_sets);
  probs.reserve(num_sets);
  for (int k = 0; k < num_sets; ++k) {
    int idx = 0;
    double p = 0.0;
    long m = 0;
    if (!(is >> idx >> p >> m)) detail::ensemble_parse_fail("missing edge set header");
    if (idx != k + 1) detail::ensemble_parse_fail("edge sets must appear in order 1..K");
    if (m < 0) detail::ensemble_parse_fail("negative edge count");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(m);
    for (long e = 0; e < m; ++e) {
      int a = 0, b = 0;
      if (!(is >> a >> b)) detail::ensemble_parse_fail("truncated edge list");
      if (a < 1 || b < 1 || a > nodes || b > nodes)
        detail::ensemble_parse_fail("edge endpoint out of range");
      edges.emplace_back(a - 1, b - 1);
    }
    sets.push_back(EdgeSet::from_pairs(std::move(edges)));
    probs.push_back(p);
  }
  return EdgeSetEnsemble(nodes, std::move(sets), std::move(probs));
}

inline void save_ensemble(const std::filesystem::path& path,
                          const EdgeSetEnsemble& ensemble) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_ensemble(os, ensemble);
}

inline EdgeSetEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open ensemble file " + path.string());
  return load_ensemble(is);
}

/// Explicit weight matrix file, used to inject externally supplied mixing
/// matrices instead of the Metropolis construction. Header "N K", then per
/// matrix a line "k" followed by N rows of N entries.
inline std::vector<WeightMatrix> load_weight_matrices(std::istream& is) {
  int nodes = 0, count = 0;
  if (!(is >> nodes >> count))
    throw std::runtime_error("weights file: missing 'N K' header");
  if (nodes < 2 || count < 1) throw std::runtime_error("weights file: invalid header values");
  std::vector<WeightMatrix> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    int idx = 0;
    if (!(is >> idx)) throw std::runtime_error("weights file: missing matrix header");
    if (idx != k + 1)
      throw std::runtime_error("weights file: matrices must appear in order 1..K");
    Eigen::MatrixXd w(nodes, nodes);
    for (int i = 0; i < nodes; ++i)
      for (int j = 0; j < nodes; ++j)
        if (!(is >> w(i, j))) throw std::runtime_error("weights file: truncated matrix");
    out.push_back(WeightMatrix::from_dense(std::move(w), k));
  }
  return out;
}

inline std::vector<WeightMatrix> load_weight_matrices(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open weights file " + path.string());
  return load_weight_matrices(is);
}

inline void save_weight_matrices(std::ostream& os,
                                 const std::vector<WeightMatrix>& weights) {
  if (weights.empty()) throw std::invalid_argument("no weight matrices to save");
  const Eigen::Index nodes = weights[0].entries.rows();
  os << nodes << ' ' << weights.size() << '\n';
  for (std::size_t k = 0; k < weights.size(); ++k) {
    os << (k + 1) << '\n';
    const auto& m = weights[k].entries;
    for (Eigen::Index i = 0; i < nodes; ++i) {
      for (Eigen::Index j = 0; j < nodes; ++j) {
        if (j) os << ' ';
        os << detail::format_prob(m(i, j));
      }
      os << '\n';
    }
  }
}

/// Largest eigenvalue of the graph Laplacian L = D - A of one edge set.
inline double laplacian_lambda_max(const EdgeSet& edges, int nodes) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nodes, nodes);
  for (const auto& [a, b] : edges.edges) {
    EdgeSet::check_range(a, b, nodes);
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace fade
