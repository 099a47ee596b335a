#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "knac/contingency.hpp"
#include "knac/dataset.hpp"
#include "knac/metrics.hpp"

namespace knac {

struct RecommendParams {
    double epsilon_split = 0.8;
    double lambda_split = 0.1;  // must stay below 1: it divides the split threshold
    double epsilon_merge = 0.8;
    double lambda_merge = 0.2;
    LinkageKind linkage = LinkageKind::average;
    std::size_t silhouette_cap = kDefaultSilhouetteCap;
    std::uint64_t seed = 0;
    AxisMode axis_mode = AxisMode::column;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct SplitRecommendation {
    int expert_label = 0;                  // row of the contingency matrix
    std::vector<int> candidates;           // auto-cluster columns, ascending
    std::vector<double> per_candidate_confidence;
    double confidence = 0.0;               // mean of the per-candidate values
    std::optional<double> s_dec;           // absent when lambda_split == 0
};

struct MergeRecommendation {
    int first = 0;   // expert label, first < second
    int second = 0;
    int target_cluster = 0;
    double confidence = 0.0;
    double sim_term = 0.0;
    std::optional<double> linkage_term;    // 1 - normalised linkage; absent when lambda_merge == 0
};

/// Columns j of row `row` with H[row][j] / (1 - lambda_split) > epsilon_split.
std::vector<int> split_candidates(const SplitMatrix& h, std::size_t row, const RecommendParams& params);

/// Relabels the points of expert cluster `row` by their auto cluster among
/// `candidates`; points in other auto clusters share one residual label.
/// New labels are numbered after the existing expert labels.
std::vector<int> relabel_for_split(const LabeledDataset& ds, int row, const std::vector<int>& candidates);

/// Silhouette difference after the split mapped affinely from [-2, 2] to [0, 1].
double silhouette_decrease(const LabeledDataset& ds, int row, const std::vector<int>& candidates,
                           const RecommendParams& params);

SplitRecommendation split_confidences(const LabeledDataset& ds, int row, const std::vector<int>& candidates,
                                      const SplitMatrix& h, const RecommendParams& params);

/// Every expert row with at least two candidates, ordered by confidence
/// (descending), then by expert id.
std::vector<SplitRecommendation> recommend_splits(const LabeledDataset& ds, const SplitMatrix& h,
                                                  const RecommendParams& params);

/// All unordered expert pairs whose combined confidence exceeds
/// epsilon_merge, ordered by confidence (descending), then expert ids, then
/// target cluster.
std::vector<MergeRecommendation> merge_candidates(const LabeledDataset& ds, const ContingencyMatrix& m,
                                                  const MergeMatrix& mm, const RecommendParams& params);

struct LabelNames {
    std::vector<std::string> expert;
    std::vector<std::string> cluster;

    static LabelNames of(const LabeledDataset& ds) { return {ds.expert_names, ds.cluster_names}; }
};

/// Multi-line listing, e.g.
///   SPLIT
///       EXPERT CLUSTER  E_1
///   INTO
///       CLUSTERS  [(C_1, C_2)]  (Confidence 0.87)
std::string render(const SplitRecommendation& rec, const LabelNames& names);
std::string render(const MergeRecommendation& rec, const LabelNames& names);

/// Two-decimal fixed formatting used in every text listing.
std::string format_fixed2(double value);

nlohmann::json to_json(const SplitRecommendation& rec, const LabelNames& names);
nlohmann::json to_json(const MergeRecommendation& rec, const LabelNames& names);
SplitRecommendation split_from_json(const nlohmann::json& j);
MergeRecommendation merge_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const RecommendParams& p);
void from_json(const nlohmann::json& j, RecommendParams& p);

}  // namespace knac
