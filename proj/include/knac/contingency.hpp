#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "knac/dataset.hpp"
#include "knac/matrix.hpp"

namespace knac {

/// Co-assignment counts: row i is expert label i, column j auto cluster j.
struct ContingencyMatrix {
    CountMatrix counts;
    std::vector<std::string> expert_ids;
    std::vector<std::string> cluster_ids;

    std::size_t experts() const noexcept { return counts.rows(); }
    std::size_t clusters() const noexcept { return counts.cols(); }
    long long total() const;
};

/// Which axis the entropy penalty and the first l2 normalisation run along.
/// Column mode scores whether an auto cluster sits inside one expert cluster;
/// row mode follows the literal subscripts of the split formula.
enum class AxisMode { column, row };

struct SplitMatrix {
    RealMatrix values;
    AxisMode axis_mode = AxisMode::column;
};

struct MergeMatrix {
    RealMatrix values;  // row-l2-normalised counts
    RealMatrix sim;     // values * values^T, clamped to [0, 1]
};

ContingencyMatrix contingency(const LabeledDataset& ds);
ContingencyMatrix contingency(std::span<const int> expert, std::size_t n_expert,
                              std::span<const int> clusters, std::size_t n_clusters);

/// Shannon entropy in bits of the normalised vector; 0 log 0 is taken as 0.
/// Throws std::invalid_argument on an all-zero or negative input.
double entropy_bits(std::span<const double> distribution);
double entropy_bits(std::span<const long long> counts);

SplitMatrix split_matrix(const ContingencyMatrix& m, AxisMode mode = AxisMode::column);
MergeMatrix merge_matrix(const ContingencyMatrix& m);

const char* to_string(AxisMode mode);
AxisMode axis_mode_from_string(const std::string& s);

void to_json(nlohmann::json& j, const ContingencyMatrix& m);
void to_json(nlohmann::json& j, const SplitMatrix& m);
void to_json(nlohmann::json& j, const MergeMatrix& m);

}  // namespace knac
