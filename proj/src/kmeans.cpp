#include "knac/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace knac {

namespace {

double squared(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

RealMatrix plus_plus_init(const RealMatrix& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    RealMatrix centers(k, x.cols());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t first = pick(rng);
    std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared(x.row(i), centers.row(0));
    std::vector<bool> chosen(n, false);
    chosen[first] = true;

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t next = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            next = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0.0 && d2[i] > 0.0) {
                    next = i;
                    break;
                }
            }
        } else {
            // every remaining point coincides with a center: take the first unused row
            next = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
        chosen[next] = true;
        std::copy(x.row(next).begin(), x.row(next).end(), centers.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared(x.row(i), centers.row(c)));
    }
    return centers;
}

double assign(const RealMatrix& x, const RealMatrix& centers, std::vector<int>& labels) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t c = 0; c < centers.rows(); ++c) {
            const double d = squared(x.row(i), centers.row(c));
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        labels[i] = arg;
        inertia += best;
    }
    return inertia;
}

KMeansResult lloyd(const RealMatrix& x, RealMatrix centers, const KMeansConfig& cfg) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t k = centers.rows();
    KMeansResult res;
    res.labels.assign(n, 0);
    double inertia = assign(x, centers, res.labels);

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        RealMatrix next(k, d, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[res.labels[i]];
            for (std::size_t f = 0; f < d; ++f) next(res.labels[i], f) += x(i, f);
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::copy(centers.row(c).begin(), centers.row(c).end(), next.row(c).begin());  // keep empty centers
                continue;
            }
            for (std::size_t f = 0; f < d; ++f) next(c, f) /= static_cast<double>(counts[c]);
            shift += squared(next.row(c), centers.row(c));
        }
        centers = std::move(next);
        const double updated = assign(x, centers, res.labels);
        // Lloyd steps never increase the objective (up to rounding).
        if (updated > inertia * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("kmeans: inertia increased between iterations");
        inertia = updated;
        res.iterations = it + 1;
        if (shift <= cfg.tol) break;
    }
    res.centroids = std::move(centers);
    res.inertia = inertia;
    return res;
}

// Renumber clusters by first appearance so equal partitions print equally.
void normalize_labels(KMeansResult& res) {
    std::map<int, int> order;
    for (int l : res.labels) order.emplace(l, static_cast<int>(order.size()));
    RealMatrix centers(res.centroids.rows(), res.centroids.cols());
    std::vector<bool> used(res.centroids.rows(), false);
    for (auto& [old_id, new_id] : order) {
        std::copy(res.centroids.row(old_id).begin(), res.centroids.row(old_id).end(), centers.row(new_id).begin());
        used[old_id] = true;
    }
    int next = static_cast<int>(order.size());
    for (std::size_t c = 0; c < used.size(); ++c)
        if (!used[c]) std::copy(res.centroids.row(c).begin(), res.centroids.row(c).end(), centers.row(next++).begin());
    for (int& l : res.labels) l = order[l];
    res.centroids = std::move(centers);
}

}  // namespace

KMeansResult kmeans_fit(const RealMatrix& features, const KMeansConfig& config) {
    if (config.k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
    if (config.k > features.rows())
        throw std::invalid_argument("kmeans: k = " + std::to_string(config.k) + " exceeds the " +
                                    std::to_string(features.rows()) + " available rows");
    std::mt19937_64 rng(config.seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t run = 0; run < std::max<std::size_t>(config.n_init, 1); ++run) {
        KMeansResult res = lloyd(features, plus_plus_init(features, config.k, rng), config);
        if (res.inertia < best.inertia) best = std::move(res);
    }
    normalize_labels(best);
    return best;
}

}  // namespace knac
