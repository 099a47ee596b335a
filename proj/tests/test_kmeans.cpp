#include <doctest.h>

#include "knac/kmeans.hpp"
#include "knac/metrics.hpp"
#include "support.hpp"

using namespace knac;
using knac::testing::Gen;

namespace {

double oracle_inertia(const RealMatrix& x, const std::vector<int>& labels, std::size_t k) {
    RealMatrix c(k, x.cols());
    std::vector<double> n(k, 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        n[labels[r]] += 1;
        for (std::size_t f = 0; f < x.cols(); ++f) c(labels[r], f) += x(r, f);
    }
    double total = 0;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t f = 0; f < x.cols(); ++f) total += std::pow(x(r, f) - c(labels[r], f) / n[labels[r]], 2);
    return total;
}

}  // namespace

TEST_CASE("separated blobs are recovered exactly") {
    BlobSpec spec;
    spec.n_blobs = 4;
    spec.points_per_blob = 50;
    spec.centers = {{0, 0}, {30, 0}, {0, 30}, {30, 30}};
    spec.seed = 5;
    const auto ds = generate_blobs(spec);
    KMeansConfig config;
    config.k = 4;
    config.seed = 1;
    const auto fit = kmeans_fit(ds.features, config);
    CHECK(agreement(ds.expert_labels, fit.labels).v_measure == doctest::Approx(1.0));
    CHECK(fit.inertia == doctest::Approx(oracle_inertia(ds.features, fit.labels, 4)).epsilon(1e-9));
}

TEST_CASE("k of one and k equal to n") {
    Gen g(6);
    const auto x = g.matrix(12, 3);
    KMeansConfig one;
    one.k = 1;
    const auto a = kmeans_fit(x, one);
    CHECK(std::all_of(a.labels.begin(), a.labels.end(), [](int l) { return l == 0; }));
    CHECK(a.inertia == doctest::Approx(oracle_inertia(x, a.labels, 1)).epsilon(1e-9));

    KMeansConfig all;
    all.k = 12;
    const auto b = kmeans_fit(x, all);
    CHECK(b.inertia == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<int> sorted = b.labels;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("fits are deterministic per seed and use every cluster") {
    Gen g(19);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = g.size(5, 120), k = g.size(1, std::min<std::size_t>(n, 6));
        const auto x = g.matrix(n, g.size(1, 3));
        KMeansConfig config;
        config.k = k;
        config.seed = g.engine()();
        const auto a = kmeans_fit(x, config);
        const auto b = kmeans_fit(x, config);
        CHECK(a.labels == b.labels);
        CHECK(a.inertia == b.inertia);
        std::vector<int> used(k, 0);
        for (int l : a.labels) {
            REQUIRE(l >= 0);
            REQUIRE(static_cast<std::size_t>(l) < k);
            used[l] = 1;
        }
        CHECK(std::accumulate(used.begin(), used.end(), 0) == static_cast<int>(k));
    }
}

TEST_CASE("invalid k is rejected") {
    const RealMatrix x(3, 1);
    KMeansConfig config;
    config.k = 0;
    CHECK_THROWS_AS(kmeans(x, config), std::invalid_argument);
    config.k = 4;
    CHECK_THROWS_AS(kmeans(x, config), std::invalid_argument);
}
