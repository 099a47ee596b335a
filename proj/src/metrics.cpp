#include "knac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace knac {

namespace {

thread_local std::uint64_t g_silhouette_evaluations = 0;

// Compact arbitrary label ids onto 0..k-1 preserving order.
std::vector<int> compact(std::span<const int> labels, std::size_t& k) {
    std::map<int, int> index;
    for (int l : labels) index.emplace(l, 0);
    int next = 0;
    for (auto& [label, id] : index) id = next++;
    k = index.size();
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index[labels[i]];
    return out;
}

double entropy_of_counts(const std::vector<double>& counts, double total) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0) h -= (c / total) * std::log2(c / total);
    return h;
}

}  // namespace

const char* to_string(LinkageKind kind) {
    switch (kind) {
    case LinkageKind::single: return "single";
    case LinkageKind::complete: return "complete";
    case LinkageKind::average: return "average";
    case LinkageKind::centroid: return "centroid";
    }
    return "average";
}

LinkageKind linkage_from_string(const std::string& s) {
    if (s == "single") return LinkageKind::single;
    if (s == "complete") return LinkageKind::complete;
    if (s == "average") return LinkageKind::average;
    if (s == "centroid") return LinkageKind::centroid;
    throw std::invalid_argument("unknown linkage kind: " + s);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::uint64_t silhouette_evaluations() noexcept { return g_silhouette_evaluations; }

double silhouette(const RealMatrix& features, std::span<const int> labels, std::size_t subsample_cap,
                  std::uint64_t seed) {
    ++g_silhouette_evaluations;
    const std::size_t n = features.rows();
    if (labels.size() != n) throw std::invalid_argument("silhouette: label count does not match rows");
    if (subsample_cap < 2) throw std::invalid_argument("silhouette: subsample cap must be at least 2");

    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (n > subsample_cap) {
        std::mt19937_64 rng(seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(subsample_cap);
        std::sort(rows.begin(), rows.end());
    }

    std::vector<int> picked(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) picked[i] = labels[rows[i]];
    std::size_t k = 0;
    const std::vector<int> ids = compact(picked, k);
    if (k < 2) throw std::invalid_argument("silhouette: needs at least 2 distinct labels");

    std::vector<std::size_t> sizes(k, 0);
    for (int id : ids) ++sizes[id];

    const std::size_t m = rows.size();
    std::vector<double> sums(k);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int own = ids[i];
        if (sizes[own] == 1) continue;  // singleton scores 0
        std::fill(sums.begin(), sums.end(), 0.0);
        const auto xi = features.row(rows[i]);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            sums[ids[j]] += euclidean(xi, features.row(rows[j]));
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (static_cast<int>(c) != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(m);
}

double linkage_distance(const RealMatrix& features, std::span<const int> labels, int a, int b,
                        LinkageKind kind) {
    if (labels.size() != features.rows())
        throw std::invalid_argument("linkage_distance: label count does not match rows");
    std::vector<std::size_t> ra, rb;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == a) ra.push_back(i);
        if (labels[i] == b) rb.push_back(i);
    }
    if (ra.empty() || rb.empty()) throw std::invalid_argument("linkage_distance: empty cluster");

    if (kind == LinkageKind::centroid) {
        const std::size_t d = features.cols();
        std::vector<double> ca(d, 0.0), cb(d, 0.0);
        for (std::size_t r : ra)
            for (std::size_t c = 0; c < d; ++c) ca[c] += features(r, c);
        for (std::size_t r : rb)
            for (std::size_t c = 0; c < d; ++c) cb[c] += features(r, c);
        for (std::size_t c = 0; c < d; ++c) {
            ca[c] /= static_cast<double>(ra.size());
            cb[c] /= static_cast<double>(rb.size());
        }
        return euclidean(ca, cb);
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double sum = 0.0;
    for (std::size_t i : ra)
        for (std::size_t j : rb) {
            const double dist = euclidean(features.row(i), features.row(j));
            lo = std::min(lo, dist);
            hi = std::max(hi, dist);
            sum += dist;
        }
    switch (kind) {
    case LinkageKind::single: return lo;
    case LinkageKind::complete: return hi;
    default: return sum / static_cast<double>(ra.size() * rb.size());
    }
}

double diameter(const RealMatrix& features) {
    double best = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t j = i + 1; j < features.rows(); ++j)
            best = std::max(best, euclidean(features.row(i), features.row(j)));
    return best;
}

RealMatrix linkage_matrix_normalized(const RealMatrix& features, std::span<const int> labels,
                                     LinkageKind kind) {
    std::size_t k = 0;
    const std::vector<int> ids = compact(labels, k);
    if (k < 2) throw std::invalid_argument("linkage_matrix_normalized: needs at least 2 labels");
    const double diam = diameter(features);
    RealMatrix out(k, k, 0.0);
    if (diam == 0.0) return out;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            const double d = std::clamp(
                linkage_distance(features, ids, static_cast<int>(a), static_cast<int>(b), kind) / diam, 0.0, 1.0);
            out(a, b) = d;
            out(b, a) = d;
        }
    return out;
}

AgreementScores agreement(std::span<const int> reference, std::span<const int> predicted) {
    if (reference.size() != predicted.size())
        throw std::invalid_argument("agreement: label vectors differ in length (" +
                                    std::to_string(reference.size()) + " vs " +
                                    std::to_string(predicted.size()) + ")");
    AgreementScores s{1.0, 1.0, 1.0};
    if (reference.empty()) return s;

    std::size_t kc = 0, kk = 0;
    const std::vector<int> c = compact(reference, kc);
    const std::vector<int> k = compact(predicted, kk);
    const double n = static_cast<double>(reference.size());

    std::vector<double> joint(kc * kk, 0.0), csize(kc, 0.0), ksize(kk, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        joint[c[i] * kk + k[i]] += 1.0;
        csize[c[i]] += 1.0;
        ksize[k[i]] += 1.0;
    }
    const double hc = entropy_of_counts(csize, n);
    const double hk = entropy_of_counts(ksize, n);
    double hc_given_k = 0.0, hk_given_c = 0.0;
    for (std::size_t a = 0; a < kc; ++a)
        for (std::size_t b = 0; b < kk; ++b) {
            const double nab = joint[a * kk + b];
            if (nab == 0.0) continue;
            hc_given_k -= (nab / n) * std::log2(nab / ksize[b]);
            hk_given_c -= (nab / n) * std::log2(nab / csize[a]);
        }
    s.homogeneity = hc == 0.0 ? 1.0 : std::clamp(1.0 - hc_given_k / hc, 0.0, 1.0);
    s.completeness = hk == 0.0 ? 1.0 : std::clamp(1.0 - hk_given_c / hk, 0.0, 1.0);
    const double sum = s.homogeneity + s.completeness;
    s.v_measure = sum == 0.0 ? 0.0 : 2.0 * s.homogeneity * s.completeness / sum;
    return s;
}

void to_json(nlohmann::json& j, const AgreementScores& s) {
    j = {{"homogeneity", s.homogeneity}, {"completeness", s.completeness}, {"v_measure", s.v_measure}};
}

void from_json(const nlohmann::json& j, AgreementScores& s) {
    j.at("homogeneity").get_to(s.homogeneity);
    j.at("completeness").get_to(s.completeness);
    j.at("v_measure").get_to(s.v_measure);
}

}  // namespace knac
