#include "fie/kmeans.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <vector>

using namespace fie;
using fie::testing::max_abs_diff;
using fie::testing::random_matrix;

TEST_SUITE("kmeans") {
  TEST_CASE("as many clusters as distinct rows recovers the rows") {
    Matrix x(4, 2);
    x << 0, 0, 5, 1, -3, 2, 8, 8;
    KMeansConfig cfg;
    cfg.clusters = 4;
    const KMeansResult r = kmeans_fit(x, cfg);
    CHECK(r.centers.means == x);
    CHECK(r.inertia == 0.0);
    CHECK_FALSE(r.degenerate);
  }

  TEST_CASE("two far blobs are separated") {
    Matrix x = random_matrix(200, 2, 3);
    x.bottomRows(100).col(0).array() += 100.0;
    KMeansConfig cfg;
    cfg.clusters = 2;
    cfg.seed = 12;
    const KMeansResult r = kmeans_fit(x, cfg);
    const RowVector a = x.topRows(100).colwise().mean();
    const RowVector b = x.bottomRows(100).colwise().mean();
    const Index first = r.centers.means(0, 0) < 50.0 ? 0 : 1;
    CHECK((r.centers.means.row(first) - a).norm() < 0.2);
    CHECK((r.centers.means.row(1 - first) - b).norm() < 0.2);
  }

  TEST_CASE("one cluster is the mean with the total sum of squares") {
    const Matrix x = random_matrix(50, 3, 8, 2.0);
    KMeansConfig cfg;
    const KMeansResult r = kmeans_fit(x, cfg);
    const RowVector mean = x.colwise().mean();
    CHECK(max_abs_diff(Matrix(r.centers.means), Matrix(mean)) < 1e-12);
    CHECK(r.inertia == doctest::Approx((x.rowwise() - mean).squaredNorm()).epsilon(1e-12));
  }

  TEST_CASE("too few distinct rows pads the centers and flags it") {
    Matrix x(6, 1);
    x << 1, 1, 2, 2, 1, 2;
    KMeansConfig cfg;
    cfg.clusters = 4;
    const KMeansResult r = kmeans_fit(x, cfg);
    CHECK(r.degenerate);
    Matrix expected(4, 1);
    expected << 1, 2, 1, 2;
    CHECK(r.centers.means == expected);
    CHECK(r.inertia == 0.0);
  }

  TEST_CASE("inertia never increases across Lloyd steps") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      KMeansConfig cfg;
      cfg.clusters = 5;
      cfg.seed = seed;
      cfg.tol = 0.0;
      const KMeansResult r = kmeans_fit(random_matrix(300, 2, seed + 100), cfg);
      for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
        CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
      }
    }
  }

  TEST_CASE("fixed seed gives identical centers") {
    const Matrix x = random_matrix(400, 3, 6);
    KMeansConfig cfg;
    cfg.clusters = 7;
    cfg.seed = 99;
    CHECK(kmeans_fit(x, cfg).centers.means == kmeans_fit(x, cfg).centers.means);
  }

  TEST_CASE("configuration is validated") {
    KMeansConfig cfg;
    cfg.clusters = 0;
    CHECK_THROWS_AS(kmeans_fit(Matrix::Zero(3, 1), cfg), std::invalid_argument);
    cfg.clusters = 1;
    cfg.restarts = 0;
    CHECK_THROWS_AS(kmeans_fit(Matrix::Zero(3, 1), cfg), std::invalid_argument);
  }

  TEST_CASE("fit_model learns anchors layer by layer") {
    Rng rng(5);
    std::vector<std::pair<Index, Index>> edges;
    for (Index a = 0; a < 100; ++a) {
      for (Index b = a + 1; b < 100; ++b) {
        if (rng.uniform01() < 0.05) edges.emplace_back(a, b);
      }
    }
    const SparseGraph g = SparseGraph::from_edges(100, edges, random_matrix(100, 3, 7));
    std::vector<LayerConfig> layers(2);
    layers[0].components = 4;
    layers[1].components = 2;
    KMeansConfig km;
    km.seed = 3;
    const FitResult fit = fit_model(g, layers, km);
    REQUIRE(fit.model.layers.size() == 2);
    CHECK(fit.model.input_dim == 3);
    CHECK(fit.model.layers[0].anchors.components() == 4);
    CHECK(fit.model.layers[0].anchors.dim() == 3);
    CHECK(fit.model.layers[1].anchors.dim() == 12);
    CHECK_NOTHROW(fit.model.validate());
    CHECK(fit.warnings.empty());
    const FitResult again = fit_model(g, layers, km);
    CHECK(again.model.layers[1].anchors.means == fit.model.layers[1].anchors.means);

    KMeansConfig capped = km;
    capped.sample_cap = 30;
    const FitResult sampled = fit_model(g, layers, capped);
    CHECK(sampled.model.layers[1].anchors.dim() == 12);
  }

  TEST_CASE("fit_model warns when rows repeat") {
    const SparseGraph g =
        SparseGraph::from_edges(6, {{0, 1}, {1, 2}, {3, 4}}, Matrix::Ones(6, 2));
    std::vector<LayerConfig> layers(1);
    layers[0].components = 3;
    const FitResult fit = fit_model(g, layers, KMeansConfig{});
    CHECK(fit.model.layers[0].anchors.means == Matrix::Ones(3, 2));
    CHECK(fit.warnings.size() == 1);
  }
}
