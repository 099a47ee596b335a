#include "knac/contingency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace knac {

namespace {

void minmax_rows(RealMatrix& h) {
    for (std::size_t i = 0; i < h.rows(); ++i) {
        auto row = h.row(i);
        if (row.empty()) continue;
        const auto [lo_it, hi_it] = std::minmax_element(row.begin(), row.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        if (hi > lo) {
            for (double& v : row) v = (v - lo) / (hi - lo);
        } else {
            // flat row: no evidence when zero, every column equally strong otherwise
            std::fill(row.begin(), row.end(), hi > 0.0 ? 1.0 : 0.0);
        }
    }
}

double entropy_penalty(double entropy, std::size_t n_expert) {
    if (n_expert <= 1) return 1.0;
    return entropy / std::log2(static_cast<double>(n_expert)) + 1.0;
}

nlohmann::json rows_json(const RealMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

}  // namespace

long long ContingencyMatrix::total() const {
    return std::accumulate(counts.data().begin(), counts.data().end(), 0LL);
}

ContingencyMatrix contingency(std::span<const int> expert, std::size_t n_expert,
                              std::span<const int> clusters, std::size_t n_clusters) {
    if (expert.size() != clusters.size())
        throw std::invalid_argument("contingency: label vectors differ in length");
    ContingencyMatrix m;
    m.counts = CountMatrix(n_expert, n_clusters, 0);
    for (std::size_t p = 0; p < expert.size(); ++p) {
        if (clusters[p] == kUnsetLabel)
            throw std::invalid_argument("contingency: cluster labels are not set");
        if (expert[p] < 0 || static_cast<std::size_t>(expert[p]) >= n_expert ||
            clusters[p] < 0 || static_cast<std::size_t>(clusters[p]) >= n_clusters)
            throw std::invalid_argument("contingency: label id out of range");
        ++m.counts(expert[p], clusters[p]);
    }
    for (std::size_t i = 0; i < n_expert; ++i) m.expert_ids.push_back(std::to_string(i));
    for (std::size_t j = 0; j < n_clusters; ++j) m.cluster_ids.push_back(std::to_string(j));
    return m;
}

ContingencyMatrix contingency(const LabeledDataset& ds) {
    if (!ds.clustered()) throw std::invalid_argument("contingency: cluster labels are not set");
    ContingencyMatrix m = contingency(ds.expert_labels, ds.expert_count(), ds.cluster_labels, ds.cluster_count());
    m.expert_ids = ds.expert_names;
    m.cluster_ids = ds.cluster_names;
    return m;
}

double entropy_bits(std::span<const double> distribution) {
    double total = 0.0;
    for (double v : distribution) {
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("entropy_bits: entries must be finite and non-negative");
        total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("entropy_bits: distribution sums to zero");
    double h = 0.0;
    for (double v : distribution) {
        if (v == 0.0) continue;
        const double p = v / total;
        h -= p * std::log2(p);
    }
    return h;
}

double entropy_bits(std::span<const long long> counts) {
    std::vector<double> d(counts.begin(), counts.end());
    return entropy_bits(std::span<const double>(d));
}

SplitMatrix split_matrix(const ContingencyMatrix& m, AxisMode mode) {
    const std::size_t ne = m.experts();
    const std::size_t nc = m.clusters();
    if (ne == 0) throw std::invalid_argument("split_matrix: no expert labels");

    SplitMatrix out;
    out.axis_mode = mode;
    out.values = RealMatrix(ne, nc, 0.0);

    const bool by_column = mode == AxisMode::column;
    const std::size_t lines = by_column ? nc : ne;
    const std::size_t len = by_column ? ne : nc;
    std::vector<double> line(len);
    for (std::size_t a = 0; a < lines; ++a) {
        for (std::size_t b = 0; b < len; ++b)
            line[b] = static_cast<double>(by_column ? m.counts(b, a) : m.counts(a, b));
        double norm = 0.0;
        for (double v : line) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;  // empty column/row stays zero
        const double denom = norm * entropy_penalty(entropy_bits(std::span<const double>(line)), ne);
        for (std::size_t b = 0; b < len; ++b) {
            double& cell = by_column ? out.values(b, a) : out.values(a, b);
            cell = line[b] / denom;
        }
    }
    minmax_rows(out.values);
    return out;
}

MergeMatrix merge_matrix(const ContingencyMatrix& m) {
    const std::size_t ne = m.experts();
    const std::size_t nc = m.clusters();
    MergeMatrix out;
    out.values = RealMatrix(ne, nc, 0.0);
    for (std::size_t i = 0; i < ne; ++i) {
        double norm = 0.0;
        for (long long c : m.counts.row(i)) norm += static_cast<double>(c) * static_cast<double>(c);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (std::size_t j = 0; j < nc; ++j) out.values(i, j) = static_cast<double>(m.counts(i, j)) / norm;
    }
    out.sim = RealMatrix(ne, ne, 0.0);
    for (std::size_t a = 0; a < ne; ++a) {
        for (std::size_t b = a; b < ne; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < nc; ++j) dot += out.values(a, j) * out.values(b, j);
            dot = std::clamp(dot, 0.0, 1.0);
            out.sim(a, b) = dot;
            out.sim(b, a) = dot;
        }
    }
    return out;
}

const char* to_string(AxisMode mode) { return mode == AxisMode::column ? "column" : "row"; }

AxisMode axis_mode_from_string(const std::string& s) {
    if (s == "column") return AxisMode::column;
    if (s == "row") return AxisMode::row;
    throw std::invalid_argument("unknown axis mode: " + s);
}

void to_json(nlohmann::json& j, const ContingencyMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.experts(); ++i) {
        auto r = m.counts.row(i);
        rows.push_back(std::vector<long long>(r.begin(), r.end()));
    }
    j = {{"expert_ids", m.expert_ids}, {"cluster_ids", m.cluster_ids}, {"counts", rows}};
}

void to_json(nlohmann::json& j, const SplitMatrix& m) {
    j = {{"axis_mode", to_string(m.axis_mode)}, {"values", rows_json(m.values)}};
}

void to_json(nlohmann::json& j, const MergeMatrix& m) {
    j = {{"values", rows_json(m.values)}, {"sim", rows_json(m.sim)}};
}

}  // namespace knac
