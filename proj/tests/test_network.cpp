#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "fade/network.hpp"
#include "fade/rng.hpp"

using fade::EdgeSet;
using fade::EdgeSetEnsemble;
using fade::Rng;

namespace {

EdgeSet complete_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  return EdgeSet{std::move(edges)};
}

}  // namespace

TEST_CASE("metropolis weights on a path") {
  const EdgeSet path = EdgeSet::from_pairs({{0, 1}, {1, 2}});
  const auto w = fade::metropolis_weights(path, 3);
  Eigen::MatrixXd expected(3, 3);
  const double third = 1.0 / 3.0;
  expected << 1.0 - third, third, 0.0,
              third, third, third,
              0.0, third, 1.0 - third;
  CHECK((w.entries - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_NOTHROW(fade::validate_weight_matrix(w, path, 3));
}

TEST_CASE("metropolis weights on complete graphs equal uniform averaging") {
  for (int n : {2, 6, 8}) {
    const auto w = fade::metropolis_weights(complete_graph(n), n);
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    CHECK((w.entries - uniform).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("metropolis weights satisfy the contract on random graphs") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + rng.uniform_int(12);
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng.uniform() < 0.4) edges.emplace_back(a, b);
    const EdgeSet set{std::move(edges)};
    CHECK_NOTHROW(fade::validate_weight_matrix(fade::metropolis_weights(set, n), set, n));
  }
}

TEST_CASE("weight validation names the violated property") {
  const EdgeSet path = EdgeSet::from_pairs({{0, 1}, {1, 2}});
  auto w = fade::metropolis_weights(path, 3);

  SECTION("asymmetry") {
    Eigen::MatrixXd m = w.entries;
    m(0, 1) += 0.1;
    m(0, 0) -= 0.1;  // keep the row sum
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), path, 3),
                      Catch::Matchers::ContainsSubstring("not symmetric"));
  }
  SECTION("bad row sum") {
    Eigen::MatrixXd m = w.entries;
    m(1, 1) += 0.05;
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), path, 3),
                      Catch::Matchers::ContainsSubstring("sum to 1"));
  }
  SECTION("zero diagonal") {
    Eigen::MatrixXd m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    const EdgeSet pair = EdgeSet::from_pairs({{0, 1}});
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), pair, 2),
                      Catch::Matchers::ContainsSubstring("diagonal"));
  }
  SECTION("entry off the edge set") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), path, 3),
                      Catch::Matchers::ContainsSubstring("off the edge set"));
  }
  SECTION("missing edge") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), path, 3),
                      Catch::Matchers::ContainsSubstring("misses an edge"));
  }
  SECTION("negative entry") {
    Eigen::MatrixXd m(2, 2);
    m << 1.2, -0.2, -0.2, 1.2;
    const EdgeSet pair = EdgeSet::from_pairs({{0, 1}});
    CHECK_THROWS_WITH(fade::validate_weight_matrix(fade::WeightMatrix::from_dense(m), pair, 2),
                      Catch::Matchers::ContainsSubstring("negative"));
  }
}

TEST_CASE("edge set normalization and validation") {
  const EdgeSet s = EdgeSet::from_pairs({{2, 1}, {0, 1}});
  REQUIRE(s.edges.size() == 2);
  CHECK(s.edges[0] == std::make_pair(0, 1));
  CHECK(s.edges[1] == std::make_pair(1, 2));
  CHECK_THROWS_AS(EdgeSet::from_pairs({{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(EdgeSet::from_pairs({{0, 1}, {1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(EdgeSet::from_pairs({{-1, 2}}), std::invalid_argument);
}

TEST_CASE("ensemble construction enforces the switching law") {
  const EdgeSet pair = EdgeSet::from_pairs({{0, 1}});
  CHECK_THROWS_WITH(EdgeSetEnsemble(2, {pair, pair}, {0.0, 1.0}),
                    Catch::Matchers::ContainsSubstring("strictly positive"));
  CHECK_THROWS_WITH(EdgeSetEnsemble(2, {pair, pair}, {0.3, 0.3}),
                    Catch::Matchers::ContainsSubstring("sum to 1"));
  CHECK_THROWS_AS(EdgeSetEnsemble(2, {pair}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(EdgeSetEnsemble(2, {EdgeSet::from_pairs({{0, 5}})}, {1.0}),
                  std::invalid_argument);
  CHECK_NOTHROW(EdgeSetEnsemble(2, {pair, pair}, {0.5, 0.5}));
}

TEST_CASE("connectivity on average looks at the union graph") {
  const EdgeSet left = EdgeSet::from_pairs({{0, 1}});
  const EdgeSet right = EdgeSet::from_pairs({{1, 2}});
  // Each set alone is disconnected on 3 nodes, the union is a path.
  CHECK_FALSE(fade::is_connected(left, 3));
  CHECK(fade::check_average_connectivity(EdgeSetEnsemble(3, {left, right}, {0.5, 0.5})));
  // Node 3 never appears: disconnected on average.
  CHECK_FALSE(fade::check_average_connectivity(EdgeSetEnsemble(4, {left, right}, {0.5, 0.5})));
}

TEST_CASE("edge set sampling follows the selection probabilities") {
  const EdgeSet pair = EdgeSet::from_pairs({{0, 1}});
  const EdgeSetEnsemble ensemble(2, {pair, pair, pair}, {0.2, 0.5, 0.3});
  Rng rng(99);
  std::array<int, 3> counts{0, 0, 0};
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++counts[fade::sample_edge_index(ensemble, rng)];
  CHECK(std::abs(counts[0] / double(draws) - 0.2) < 0.02);
  CHECK(std::abs(counts[1] / double(draws) - 0.5) < 0.02);
  CHECK(std::abs(counts[2] / double(draws) - 0.3) < 0.02);
}

TEST_CASE("spectral report on a complete graph collapses to zero") {
  const int n = 6;
  const EdgeSetEnsemble ensemble(n, {complete_graph(n)}, {1.0});
  const auto report = fade::average_matrices(
      ensemble, {fade::metropolis_weights(complete_graph(n), n)});
  // W = 11'/N, so the centered matrix vanishes and only the consensus
  // eigenvalue survives.
  CHECK(report.rho_tilde < 1e-12);
  CHECK(report.second_eig_bar < 1e-12);
  CHECK(report.connected);
}

TEST_CASE("spectral report contracts for a connected ensemble") {
  const EdgeSet left = EdgeSet::from_pairs({{0, 1}, {2, 3}});
  const EdgeSet right = EdgeSet::from_pairs({{1, 2}, {3, 4}});
  const EdgeSetEnsemble ensemble(5, {left, right}, {0.5, 0.5});
  std::vector<fade::WeightMatrix> weights{fade::metropolis_weights(left, 5),
                                          fade::metropolis_weights(right, 5)};
  const auto report = fade::average_matrices(ensemble, weights);
  CHECK(report.connected);
  CHECK(report.rho_tilde < 1.0);
  CHECK(report.second_eig_bar < 1.0);
  CHECK(report.rho_tilde > 0.0);
}

TEST_CASE("disconnected union pins the contracted radius at one") {
  const EdgeSet pair = EdgeSet::from_pairs({{0, 1}});
  const EdgeSetEnsemble ensemble(3, {pair, pair}, {0.5, 0.5});
  std::vector<fade::WeightMatrix> weights{fade::metropolis_weights(pair, 3),
                                          fade::metropolis_weights(pair, 3)};
  const auto report = fade::average_matrices(ensemble, weights);
  CHECK_FALSE(report.connected);
  // The indicator of the unreachable component is a fixed direction of every
  // centered weight matrix, so the radius is exactly one.
  CHECK(report.rho_tilde == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("random ensembles are connected on average by construction") {
  Rng rng(9);
  const auto ensemble = fade::generate_random_ensemble(10, 2, 0.15, rng);
  CHECK(ensemble.size() == 2);
  CHECK(ensemble.nodes() == 10);
  CHECK(fade::check_average_connectivity(ensemble));
  for (double p : ensemble.probs()) CHECK(p == 0.5);
}

TEST_CASE("impossible densities exhaust the retry budget") {
  Rng rng(3);
  CHECK_THROWS_WITH(fade::generate_random_ensemble(20, 1, 1e-6, rng, 50),
                    Catch::Matchers::ContainsSubstring("after 50 attempts"));
}

TEST_CASE("ensemble save/load round-trips bit exactly") {
  Rng rng(5);
  const auto ensemble = fade::generate_random_ensemble(7, 3, 0.3, rng);
  std::stringstream ss;
  fade::save_ensemble(ss, ensemble);
  const auto loaded = fade::load_ensemble(ss);
  REQUIRE(loaded.nodes() == ensemble.nodes());
  REQUIRE(loaded.size() == ensemble.size());
  for (int k = 0; k < ensemble.size(); ++k) {
    CHECK(loaded.edge_set(k).edges == ensemble.edge_set(k).edges);
    CHECK(loaded.probs()[k] == ensemble.probs()[k]);
  }
  std::stringstream again;
  fade::save_ensemble(again, loaded);
  std::stringstream first;
  fade::save_ensemble(first, ensemble);
  CHECK(again.str() == first.str());
}

TEST_CASE("weights file round-trips and rejects truncation") {
  const EdgeSet path = EdgeSet::from_pairs({{0, 1}, {1, 2}});
  std::vector<fade::WeightMatrix> weights{fade::metropolis_weights(path, 3),
                                          fade::metropolis_weights(complete_graph(3), 3)};
  std::stringstream ss;
  fade::save_weight_matrices(ss, weights);
  const auto loaded = fade::load_weight_matrices(ss);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].entries == weights[0].entries);
  CHECK(loaded[1].entries == weights[1].entries);

  std::stringstream bad("2 1\n1\n0.5 0.5\n");
  CHECK_THROWS_WITH(fade::load_weight_matrices(bad),
                    Catch::Matchers::ContainsSubstring("truncated"));
}

TEST_CASE("laplacian spectral radius on known graphs") {
  CHECK(fade::laplacian_lambda_max(EdgeSet::from_pairs({{0, 1}}), 2) ==
        Catch::Approx(2.0).margin(1e-12));
  CHECK(fade::laplacian_lambda_max(complete_graph(3), 3) ==
        Catch::Approx(3.0).margin(1e-12));
  // Star on n nodes has largest Laplacian eigenvalue n.
  const EdgeSet star = EdgeSet::from_pairs({{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
  CHECK(fade::laplacian_lambda_max(star, 6) == Catch::Approx(6.0).margin(1e-12));
}
