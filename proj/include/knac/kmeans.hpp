#pragma once

#include <cstdint>
#include <vector>

#include "knac/matrix.hpp"

namespace knac {

struct KMeansConfig {
    std::size_t k = 2;
    std::size_t max_iter = 300;
    std::uint64_t seed = 0;
    double tol = 1e-8;
    std::size_t n_init = 10;  // independent k-means++ restarts, best inertia wins
};

struct KMeansResult {
    std::vector<int> labels;
    RealMatrix centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

/// Lloyd iterations from a seeded k-means++ start. Deterministic for a fixed
/// seed. Throws std::invalid_argument when k is 0 or exceeds the row count.
KMeansResult kmeans_fit(const RealMatrix& features, const KMeansConfig& config);

inline std::vector<int> kmeans(const RealMatrix& features, const KMeansConfig& config) {
    return kmeans_fit(features, config).labels;
}

}  // namespace knac
