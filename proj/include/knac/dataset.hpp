#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "knac/matrix.hpp"

namespace knac {

inline constexpr int kUnsetLabel = -1;

/// Raised on malformed input. `row` and `column` are 1-based positions in the
/// data part of the offending file (header excluded) when known.
class DatasetError : public std::runtime_error {
public:
    explicit DatasetError(const std::string& what, std::optional<std::size_t> row = {},
                          std::optional<std::size_t> column = {})
        : std::runtime_error(what), row(row), column(column) {}

    std::optional<std::size_t> row;
    std::optional<std::size_t> column;
};

/// Feature matrix together with the expert labelling (E) and an automated
/// clustering (C) of the same rows. Label ids are contiguous from 0; the
/// `*_names` vectors map an id back to the label string it came from.
struct LabeledDataset {
    RealMatrix features;
    std::vector<std::string> feature_names;
    std::vector<int> expert_labels;
    std::vector<int> cluster_labels;
    std::vector<std::string> row_ids;
    std::vector<std::string> expert_names;
    std::vector<std::string> cluster_names;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dims() const noexcept { return features.cols(); }
    std::size_t expert_count() const noexcept { return expert_names.size(); }
    std::size_t cluster_count() const noexcept { return cluster_names.size(); }
    bool clustered() const;

    /// Throws DatasetError when any structural invariant is broken.
    void validate() const;
};

struct CanonicalLabels {
    std::vector<int> ids;
    std::vector<std::string> names;
};

/// Maps arbitrary label strings onto 0..k-1. Integer-valued labels are ordered
/// numerically, anything else lexicographically.
CanonicalLabels canonicalize_labels(const std::vector<std::string>& raw);

/// Renumbers an integer labelling onto 0..k-1 keeping the numeric order.
CanonicalLabels canonicalize_labels(const std::vector<int>& raw);

struct FeatureTable {
    RealMatrix values;
    std::vector<std::string> names;
    std::vector<std::string> row_ids;
};

struct LabelColumn {
    std::vector<std::string> labels;
    std::vector<std::string> row_ids;  // empty when the file had no id column
};

FeatureTable parse_features(const std::string& text, const std::string& source);
LabelColumn parse_labels(const std::string& text, const std::string& source);

/// Assembles a dataset from already-read file contents. An empty
/// `clusters_text` leaves the cluster labels unset.
LabeledDataset assemble_dataset(const std::string& features_text, const std::string& expert_text,
                                const std::string& clusters_text);

LabeledDataset load_dataset(const std::string& features_path, const std::string& expert_path,
                            const std::string& clusters_path);

/// Canonical CSV writers. Numbers use the shortest round-trip representation,
/// so reading the output back reproduces the dataset bit-exactly.
std::string features_csv(const LabeledDataset& ds);
std::string labels_csv(const std::vector<std::string>& row_ids, const std::vector<int>& labels,
                       const std::vector<std::string>& names);
std::string label_map_json(const std::vector<std::string>& names);

/// Writes features.csv, expert.csv, clusters.csv (when clustered) and the two
/// label-map JSON files into `dir`.
void save_dataset(const LabeledDataset& ds, const std::string& dir);

/// Returns a copy with a new expert labelling (ids must be contiguous).
LabeledDataset with_expert_labels(const LabeledDataset& ds, std::vector<int> labels,
                                  std::vector<std::string> names);
LabeledDataset with_cluster_labels(const LabeledDataset& ds, std::vector<int> labels,
                                   std::vector<std::string> names = {});

struct BlobSpec {
    std::size_t n_blobs = 3;
    std::size_t points_per_blob = 100;
    std::size_t dim = 2;
    std::vector<std::vector<double>> centers;  // empty: drawn uniformly in [-10, 10]^dim
    double std = 1.0;
    std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs. Expert labels start out equal to the blob id and
/// cluster labels are unset.
LabeledDataset generate_blobs(const BlobSpec& spec);

struct LabelSplit {
    int label;
    std::size_t parts;
    std::uint64_t seed;
};

struct CorruptedLabels {
    LabeledDataset dataset;
    std::map<int, std::vector<int>> mapping;  // old expert id -> new ids
};

/// Fakes errors in the expert labelling: each set in `merges` collapses onto a
/// single new label, each split scatters a label's points uniformly at random
/// over `parts` new labels. Untouched labels come first in the new numbering,
/// then merged labels, then split parts.
CorruptedLabels corrupt_labels(const LabeledDataset& ds, const std::vector<std::vector<int>>& merges,
                               const std::vector<LabelSplit>& splits);

std::string format_number(double value);

}  // namespace knac
