#include "knac/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "knac/csv.hpp"

namespace knac {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<long long> parse_integer(const std::string& s) {
    long long v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

std::optional<double> parse_real(const std::string& s) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << text;
}

std::vector<std::string> default_row_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
}

std::vector<std::string> numbered_names(std::size_t k) { return default_row_ids(k); }

void check_contiguous(const std::vector<int>& labels, std::size_t k, const char* what) {
    std::vector<bool> seen(k, false);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= k)
            throw DatasetError(std::string(what) + " label id out of range: " + std::to_string(l));
        seen[l] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw DatasetError(std::string(what) + " label ids are not contiguous");
}

}  // namespace

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, ptr);
}

bool LabeledDataset::clustered() const {
    return !cluster_labels.empty() &&
           std::none_of(cluster_labels.begin(), cluster_labels.end(),
                        [](int l) { return l == kUnsetLabel; });
}

void LabeledDataset::validate() const {
    const std::size_t n = features.rows();
    if (n == 0) throw DatasetError("dataset has no rows");
    if (features.cols() == 0) throw DatasetError("dataset has no feature columns");
    if (feature_names.size() != features.cols())
        throw DatasetError("feature name count does not match feature columns");
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < features.cols(); ++c)
            if (!std::isfinite(features(r, c)))
                throw DatasetError("non-finite feature value at (" + std::to_string(r + 1) + "," +
                                       std::to_string(c + 1) + ")",
                                   r + 1, c + 1);
    if (expert_labels.size() != n)
        throw DatasetError("expert label count " + std::to_string(expert_labels.size()) +
                           " does not match row count " + std::to_string(n));
    if (cluster_labels.size() != n)
        throw DatasetError("cluster label count " + std::to_string(cluster_labels.size()) +
                           " does not match row count " + std::to_string(n));
    if (row_ids.size() != n) throw DatasetError("row id count does not match row count");
    check_contiguous(expert_labels, expert_names.size(), "expert");
    if (clustered()) {
        check_contiguous(cluster_labels, cluster_names.size(), "cluster");
    } else if (std::any_of(cluster_labels.begin(), cluster_labels.end(),
                           [](int l) { return l != kUnsetLabel; })) {
        throw DatasetError("cluster labels are partially unset");
    }
}

CanonicalLabels canonicalize_labels(const std::vector<std::string>& raw) {
    std::vector<std::string> distinct(raw.begin(), raw.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    const bool numeric = std::all_of(distinct.begin(), distinct.end(),
                                     [](const std::string& s) { return parse_integer(s).has_value(); });
    if (numeric) {
        std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
            return *parse_integer(a) < *parse_integer(b);
        });
    }
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < distinct.size(); ++i) index[distinct[i]] = static_cast<int>(i);

    CanonicalLabels out;
    out.names = std::move(distinct);
    out.ids.reserve(raw.size());
    for (const auto& s : raw) out.ids.push_back(index.at(s));
    return out;
}

CanonicalLabels canonicalize_labels(const std::vector<int>& raw) {
    std::vector<std::string> text;
    text.reserve(raw.size());
    for (int l : raw) text.push_back(std::to_string(l));
    return canonicalize_labels(text);
}

FeatureTable parse_features(const std::string& text, const std::string& source) {
    std::vector<csv::Row> rows;
    try {
        rows = csv::parse(text);
    } catch (const std::exception& e) {
        throw DatasetError(source + ": " + e.what());
    }
    if (rows.empty()) throw DatasetError(source + ": empty file");
    const csv::Row& header = rows.front();
    const bool has_ids = !header.empty() && trim(header.front()) == "id";
    const std::size_t first_col = has_ids ? 1 : 0;
    if (header.size() <= first_col) throw DatasetError(source + ": header has no feature columns");
    if (rows.size() == 1) throw DatasetError(source + ": no data rows");

    FeatureTable table;
    for (std::size_t c = first_col; c < header.size(); ++c) table.names.push_back(trim(header[c]));
    const std::size_t d = table.names.size();
    const std::size_t n = rows.size() - 1;
    table.values = RealMatrix(n, d);
    table.row_ids.reserve(n);

    for (std::size_t r = 0; r < n; ++r) {
        const csv::Row& row = rows[r + 1];
        if (row.size() != header.size())
            throw DatasetError(source + ": row " + std::to_string(r + 1) + " has " +
                                   std::to_string(row.size()) + " fields, expected " +
                                   std::to_string(header.size()),
                               r + 1);
        table.row_ids.push_back(has_ids ? trim(row[0]) : std::to_string(r));
        for (std::size_t c = 0; c < d; ++c) {
            const std::string cell = trim(row[first_col + c]);
            const auto value = parse_real(cell);
            const std::string where = "(" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")";
            if (!value)
                throw DatasetError(source + ": non-numeric value '" + cell + "' at " + where, r + 1, c + 1);
            if (!std::isfinite(*value))
                throw DatasetError(source + ": non-finite value '" + cell + "' at " + where, r + 1, c + 1);
            table.values(r, c) = *value;
        }
    }
    return table;
}

LabelColumn parse_labels(const std::string& text, const std::string& source) {
    std::vector<csv::Row> rows;
    try {
        rows = csv::parse(text);
    } catch (const std::exception& e) {
        throw DatasetError(source + ": " + e.what());
    }
    if (rows.empty()) throw DatasetError(source + ": empty file");

    const csv::Row& first = rows.front();
    const bool header = (first.size() == 1 && trim(first[0]) == "label") ||
                        (first.size() == 2 && trim(first[0]) == "id");
    const std::size_t start = header ? 1 : 0;
    if (rows.size() == start) throw DatasetError(source + ": no data rows");
    const std::size_t width = rows[start].size();
    if (width != 1 && width != 2)
        throw DatasetError(source + ": expected one or two columns, got " + std::to_string(width), 1);

    LabelColumn col;
    for (std::size_t r = start; r < rows.size(); ++r) {
        const std::size_t line = r - start + 1;
        if (rows[r].size() != width)
            throw DatasetError(source + ": row " + std::to_string(line) + " has " +
                                   std::to_string(rows[r].size()) + " fields, expected " +
                                   std::to_string(width),
                               line);
        if (width == 2) col.row_ids.push_back(trim(rows[r][0]));
        std::string label = trim(rows[r][width - 1]);
        if (label.empty()) throw DatasetError(source + ": empty label at row " + std::to_string(line), line, width);
        col.labels.push_back(std::move(label));
    }
    return col;
}

LabeledDataset assemble_dataset(const std::string& features_text, const std::string& expert_text,
                                const std::string& clusters_text) {
    FeatureTable table = parse_features(features_text, "features");
    const std::size_t n = table.values.rows();

    LabeledDataset ds;
    ds.features = std::move(table.values);
    ds.feature_names = std::move(table.names);
    ds.row_ids = std::move(table.row_ids);

    auto check_labels = [&](const LabelColumn& col, const std::string& what) {
        if (col.labels.size() != n)
            throw DatasetError(what + " file has " + std::to_string(col.labels.size()) +
                               " rows but the features file has " + std::to_string(n));
        if (!col.row_ids.empty()) {
            for (std::size_t r = 0; r < n; ++r)
                if (col.row_ids[r] != ds.row_ids[r])
                    throw DatasetError(what + " file: row id '" + col.row_ids[r] + "' at row " +
                                           std::to_string(r + 1) + " does not match features row id '" +
                                           ds.row_ids[r] + "'",
                                       r + 1, 1);
        }
    };

    const LabelColumn expert = parse_labels(expert_text, "expert");
    check_labels(expert, "expert");
    auto e = canonicalize_labels(expert.labels);
    ds.expert_labels = std::move(e.ids);
    ds.expert_names = std::move(e.names);

    ds.cluster_labels.assign(n, kUnsetLabel);
    if (!clusters_text.empty()) {
        const LabelColumn clusters = parse_labels(clusters_text, "clusters");
        check_labels(clusters, "clusters");
        const bool all_unset = std::all_of(clusters.labels.begin(), clusters.labels.end(),
                                           [](const std::string& s) { return s == "-1"; });
        if (!all_unset) {
            auto c = canonicalize_labels(clusters.labels);
            ds.cluster_labels = std::move(c.ids);
            ds.cluster_names = std::move(c.names);
        }
    }
    ds.validate();
    return ds;
}

LabeledDataset load_dataset(const std::string& features_path, const std::string& expert_path,
                            const std::string& clusters_path) {
    auto read = [](const std::string& path) {
        if (!std::filesystem::exists(path)) throw DatasetError("file not found: " + path);
        return csv::read_file(path);
    };
    const std::string features = read(features_path);
    const std::string expert = read(expert_path);
    const std::string clusters = clusters_path.empty() ? std::string{} : read(clusters_path);
    if (!clusters_path.empty() && clusters.empty()) throw DatasetError("clusters: empty file");
    return assemble_dataset(features, expert, clusters);
}

std::string features_csv(const LabeledDataset& ds) {
    std::string out;
    csv::Row header{"id"};
    header.insert(header.end(), ds.feature_names.begin(), ds.feature_names.end());
    out += csv::join(header) + "\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        csv::Row row{ds.row_ids[r]};
        for (double v : ds.features.row(r)) row.push_back(format_number(v));
        out += csv::join(row) + "\n";
    }
    return out;
}

std::string labels_csv(const std::vector<std::string>& row_ids, const std::vector<int>& labels,
                       const std::vector<std::string>& names) {
    std::string out = "id,label\n";
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const std::string label = labels[r] == kUnsetLabel ? std::string("-1") : names.at(labels[r]);
        out += csv::join({row_ids[r], label}) + "\n";
    }
    return out;
}

std::string label_map_json(const std::vector<std::string>& names) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = i;
    return j.dump(2) + "\n";
}

void save_dataset(const LabeledDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);
    write_text(base / "features.csv", features_csv(ds));
    write_text(base / "expert.csv", labels_csv(ds.row_ids, ds.expert_labels, ds.expert_names));
    write_text(base / "expert_labels.json", label_map_json(ds.expert_names));
    if (ds.clustered()) {
        write_text(base / "clusters.csv", labels_csv(ds.row_ids, ds.cluster_labels, ds.cluster_names));
        write_text(base / "cluster_labels.json", label_map_json(ds.cluster_names));
    }
}

LabeledDataset with_expert_labels(const LabeledDataset& ds, std::vector<int> labels,
                                  std::vector<std::string> names) {
    LabeledDataset out = ds;
    out.expert_labels = std::move(labels);
    out.expert_names = std::move(names);
    out.validate();
    return out;
}

LabeledDataset with_cluster_labels(const LabeledDataset& ds, std::vector<int> labels,
                                   std::vector<std::string> names) {
    LabeledDataset out = ds;
    if (names.empty()) {
        const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
        names = numbered_names(static_cast<std::size_t>(std::max(k, 0)));
    }
    out.cluster_labels = std::move(labels);
    out.cluster_names = std::move(names);
    out.validate();
    return out;
}

LabeledDataset generate_blobs(const BlobSpec& spec) {
    if (spec.n_blobs < 1 || spec.points_per_blob < 1 || spec.dim < 1)
        throw DatasetError("blob spec: counts must be at least 1");
    if (!(spec.std > 0) || !std::isfinite(spec.std)) throw DatasetError("blob spec: std must be positive");
    if (!spec.centers.empty()) {
        if (spec.centers.size() != spec.n_blobs)
            throw DatasetError("blob spec: expected " + std::to_string(spec.n_blobs) + " centers");
        for (const auto& c : spec.centers)
            if (c.size() != spec.dim) throw DatasetError("blob spec: center dimension mismatch");
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<std::vector<double>> centers = spec.centers;
    if (centers.empty()) {
        std::uniform_real_distribution<double> box(-10.0, 10.0);
        centers.assign(spec.n_blobs, std::vector<double>(spec.dim));
        for (auto& c : centers)
            for (auto& x : c) x = box(rng);
    }

    const std::size_t n = spec.n_blobs * spec.points_per_blob;
    LabeledDataset ds;
    ds.features = RealMatrix(n, spec.dim);
    std::normal_distribution<double> noise(0.0, spec.std);
    for (std::size_t b = 0; b < spec.n_blobs; ++b) {
        for (std::size_t p = 0; p < spec.points_per_blob; ++p) {
            const std::size_t r = b * spec.points_per_blob + p;
            for (std::size_t c = 0; c < spec.dim; ++c) ds.features(r, c) = centers[b][c] + noise(rng);
            ds.expert_labels.push_back(static_cast<int>(b));
        }
    }
    for (std::size_t c = 0; c < spec.dim; ++c) ds.feature_names.push_back("x" + std::to_string(c + 1));
    ds.cluster_labels.assign(n, kUnsetLabel);
    ds.row_ids = default_row_ids(n);
    ds.expert_names = numbered_names(spec.n_blobs);
    ds.validate();
    return ds;
}

CorruptedLabels corrupt_labels(const LabeledDataset& ds, const std::vector<std::vector<int>>& merges,
                               const std::vector<LabelSplit>& splits) {
    const int k = static_cast<int>(ds.expert_count());
    std::set<int> touched;
    auto claim = [&](int label) {
        if (label < 0 || label >= k) throw DatasetError("corrupt_labels: unknown label id " + std::to_string(label));
        if (!touched.insert(label).second)
            throw DatasetError("corrupt_labels: label " + std::to_string(label) + " used more than once");
    };
    for (const auto& set : merges) {
        if (set.empty()) throw DatasetError("corrupt_labels: empty merge set");
        for (int l : set) claim(l);
    }
    for (const auto& s : splits) {
        claim(s.label);
        if (s.parts < 2) throw DatasetError("corrupt_labels: a split needs at least 2 parts");
    }

    CorruptedLabels out;
    std::vector<int> remap(k, -1);
    int next = 0;
    for (int l = 0; l < k; ++l)
        if (!touched.count(l)) {
            remap[l] = next;
            out.mapping[l] = {next++};
        }
    for (const auto& set : merges) {
        for (int l : set) {
            remap[l] = next;
            out.mapping[l] = {next};
        }
        ++next;
    }

    std::vector<int> labels(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) labels[r] = remap[ds.expert_labels[r]];

    for (const auto& s : splits) {
        std::vector<std::size_t> members;
        for (std::size_t r = 0; r < ds.size(); ++r)
            if (ds.expert_labels[r] == s.label) members.push_back(r);
        std::mt19937_64 rng(s.seed);
        std::shuffle(members.begin(), members.end(), rng);
        auto& parts = out.mapping[s.label];
        for (std::size_t p = 0; p < s.parts; ++p) parts.push_back(next + static_cast<int>(p));
        // contiguous chunks of the permutation, sizes differ by at most one
        for (std::size_t i = 0; i < members.size(); ++i)
            labels[members[i]] = next + static_cast<int>(i * s.parts / members.size());
        next += static_cast<int>(s.parts);
    }

    out.dataset = ds;
    out.dataset.expert_labels = std::move(labels);
    out.dataset.expert_names = numbered_names(static_cast<std::size_t>(next));
    if (merges.empty() && splits.empty()) out.dataset.expert_names = ds.expert_names;
    out.dataset.validate();
    return out;
}

}  // namespace knac
