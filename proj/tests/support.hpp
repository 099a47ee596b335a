#pragma once

// Hand-rolled generators and straightforward reference implementations used
// to cross-check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "knac/dataset.hpp"
#include "knac/explain.hpp"
#include "knac/matrix.hpp"

namespace knac::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::size_t size(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

    /// n labels over 0..k-1 with every label used at least once (n >= k).
    std::vector<int> labels(std::size_t n, std::size_t k) {
        std::vector<int> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i < k ? static_cast<int>(i) : integer(0, static_cast<int>(k) - 1);
        std::shuffle(out.begin(), out.end(), rng_);
        return out;
    }

    RealMatrix matrix(std::size_t rows, std::size_t cols, double lo = -10.0, double hi = 10.0) {
        RealMatrix m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = real(lo, hi);
        return m;
    }

    CountMatrix counts(std::size_t rows, std::size_t cols, long long hi = 20, double zero_p = 0.3) {
        CountMatrix m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = coin(zero_p) ? 0 : integer(1, static_cast<int>(hi));
        return m;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Expands a count matrix into per-row label vectors reproducing it.
inline std::pair<std::vector<int>, std::vector<int>> rows_from_counts(const CountMatrix& m) {
    std::vector<int> e, c;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            for (long long k = 0; k < m(i, j); ++k) {
                e.push_back(static_cast<int>(i));
                c.push_back(static_cast<int>(j));
            }
    return {e, c};
}

inline std::map<std::pair<int, int>, long long> oracle_counts(const std::vector<int>& e, const std::vector<int>& c) {
    std::map<std::pair<int, int>, long long> out;
    for (std::size_t i = 0; i < e.size(); ++i) ++out[{e[i], c[i]}];
    return out;
}

inline double oracle_entropy(const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    double h = 0.0;
    for (double x : v)
        if (x > 0) h -= (x / total) * std::log2(x / total);
    return h;
}

inline double oracle_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

/// Textbook O(n^2) silhouette over all rows.
inline double oracle_silhouette(const RealMatrix& x, const std::vector<int>& labels) {
    const std::size_t n = x.rows();
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0;
        for (std::size_t f = 0; f < x.cols(); ++f) s += (x(a, f) - x(b, f)) * (x(a, f) - x(b, f));
        return std::sqrt(s);
    };
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;
        std::map<int, double> sum;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[labels[j]] += dist(i, j);
        const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
        double b = INFINITY;
        for (const auto& [l, s] : sum)
            if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

/// Quantile cut points by linear interpolation at k/(grid+1).
inline std::vector<double> oracle_cuts(std::vector<double> v, std::size_t grid) {
    std::sort(v.begin(), v.end());
    std::vector<double> cuts;
    for (std::size_t k = 1; k <= grid; ++k) {
        const double pos = static_cast<double>(k) / static_cast<double>(grid + 1) * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        cuts.push_back(v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]));
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

/// Best precision over the empty rule and every conjunction of one or two
/// grid predicates with non-zero coverage.
inline double oracle_best_precision(const RealMatrix& x, const std::vector<bool>& target, std::size_t grid) {
    struct Atom {
        std::size_t f;
        bool le;
        double q;
    };
    std::vector<Atom> atoms;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        std::vector<double> col(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) col[r] = x(r, f);
        for (double q : oracle_cuts(col, grid)) {
            atoms.push_back({f, true, q});
            atoms.push_back({f, false, q});
        }
    }
    auto holds = [&](const Atom& a, std::size_t r) { return a.le ? x(r, a.f) <= a.q : x(r, a.f) > a.q; };
    auto precision = [&](const std::vector<const Atom*>& conj) {
        std::size_t m = 0, h = 0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            bool ok = true;
            for (const Atom* a : conj) ok = ok && holds(*a, r);
            if (!ok) continue;
            ++m;
            if (target[r]) ++h;
        }
        return m == 0 ? -1.0 : static_cast<double>(h) / static_cast<double>(m);
    };
    double best = precision({});
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        best = std::max(best, precision({&atoms[i]}));
        for (std::size_t j = i + 1; j < atoms.size(); ++j) best = std::max(best, precision({&atoms[i], &atoms[j]}));
    }
    return best;
}

/// Dataset over `features` with numbered label names and row ids.
inline LabeledDataset labeled(RealMatrix features, std::vector<int> expert, std::vector<int> clusters) {
    LabeledDataset ds;
    const std::size_t n = features.rows();
    for (std::size_t f = 0; f < features.cols(); ++f) ds.feature_names.push_back("x" + std::to_string(f + 1));
    for (std::size_t r = 0; r < n; ++r) ds.row_ids.push_back(std::to_string(r));
    ds.features = std::move(features);
    auto names = [](const std::vector<int>& l) {
        std::vector<std::string> out;
        const int k = l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1;
        for (int i = 0; i < k; ++i) out.push_back(std::to_string(i));
        return out;
    };
    ds.expert_names = names(expert);
    ds.cluster_names = names(clusters);
    ds.expert_labels = std::move(expert);
    ds.cluster_labels = std::move(clusters);
    ds.validate();
    return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("knac-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace knac::testing
