#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "knac/dataset.hpp"
#include "knac/recommend.hpp"

namespace knac {

enum class ConditionOp { le, gt, eq, in_interval };

/// One atom of a conjunctive rule. `index` is the feature column the atom
/// reads; `feature` carries the column name for display and serialization.
struct Condition {
    std::string feature;
    std::size_t index = 0;
    ConditionOp op = ConditionOp::le;
    double value = 0.0;
    double upper = 0.0;  // only for in_interval: value <= x <= upper

    bool holds(std::span<const double> x) const;
    bool operator==(const Condition&) const = default;
};

struct ExplanationRule {
    int target_label = 0;
    std::vector<Condition> conditions;
    double precision = 0.0;
    double coverage = 0.0;
};

struct RuleConfig {
    std::size_t max_conditions = 3;
    double precision_target = 0.95;
    std::size_t quantile_grid = 9;  // cut points per feature; 9 gives deciles
    /// Rules kept per growth step. 1 is plain greedy growth; the default
    /// keeps every single-condition rule of a small feature space so that
    /// two-condition rules are searched exhaustively there.
    std::size_t beam_width = 64;
    std::vector<std::size_t> categorical;  // feature columns compared by equality
};

struct RuleStats {
    double precision = 0.0;
    double coverage = 0.0;
    std::size_t matched = 0;
};

/// Precision and coverage of `conditions` on `rows` (all rows when empty).
RuleStats evaluate_rule(const RealMatrix& features, std::span<const std::size_t> rows,
                        const std::vector<bool>& target, const std::vector<Condition>& conditions);

/// Linear-interpolation quantile cut points used as rule thresholds,
/// deduplicated and ascending.
std::vector<double> quantile_cuts(std::vector<double> values, std::size_t grid);

/// Grows a conjunction that isolates the positive rows of `target`.
/// `target` is indexed like `rows` (all feature rows when `rows` is empty).
/// Throws std::invalid_argument when the target has a single class.
ExplanationRule induce_rule(const RealMatrix& features, const std::vector<std::string>& feature_names,
                            std::span<const std::size_t> rows, const std::vector<bool>& target,
                            const RuleConfig& config = {});

/// One one-vs-rest rule per candidate, induced on the points of the expert
/// cluster being split. target_label holds the auto-cluster id.
std::vector<ExplanationRule> explain_split(const LabeledDataset& ds, const SplitRecommendation& rec,
                                           const RuleConfig& config = {});

/// One rule per expert cluster of the pair, induced on the points of both.
/// target_label holds the expert id.
std::pair<ExplanationRule, ExplanationRule> explain_merge(const LabeledDataset& ds, const MergeRecommendation& rec,
                                                          const RuleConfig& config = {});

struct BoundingBox {
    int label = 0;
    double q_lo = 0.05;
    double q_hi = 0.95;
    std::vector<std::pair<double, double>> intervals;  // per feature
};

BoundingBox bounding_box(const LabeledDataset& ds, int expert_label, double q_lo = 0.05, double q_hi = 0.95);
BoundingBox bounding_box(const RealMatrix& features, std::span<const int> labels, int label, double q_lo = 0.05,
                         double q_hi = 0.95);

std::string render(const Condition& c);
/// e.g. "C_1: x1 <= -8.20 AND x2 > -4.34 (Precision: 1.00, Coverage: 0.07)"
std::string render(const ExplanationRule& rule, const std::string& label_text);

const char* to_string(ConditionOp op);
ConditionOp condition_op_from_string(const std::string& s);

void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);
void to_json(nlohmann::json& j, const ExplanationRule& r);
void from_json(const nlohmann::json& j, ExplanationRule& r);
void to_json(nlohmann::json& j, const BoundingBox& b);
void to_json(nlohmann::json& j, const RuleConfig& c);
void from_json(const nlohmann::json& j, RuleConfig& c);

/// Rule JSON plus one '0'/'1' string per condition marking the dataset rows
/// it matches, for highlighting.
nlohmann::json rule_with_masks(const ExplanationRule& rule, const RealMatrix& features,
                               const std::string& label_text);

}  // namespace knac
