#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "knac/explain.hpp"

namespace knac {

class KnowledgeBaseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kUnlabeled = -1;

enum class ProvenanceKind { expert, split, merge };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::expert;
    int parent = -1;                    // split: label being refined
    std::pair<int, int> pair{-1, -1};   // merge: merged labels
    std::string recommendation_id;

    bool operator==(const Provenance&) const = default;
};

struct KBRule {
    std::string id;
    std::vector<Condition> conditions;
    int conclusion = 0;           // current label, rewritten by later merges
    int asserted_conclusion = -1;  // label the rule concluded when it was added
    double confidence = 1.0;
    Provenance provenance;
    bool enabled = true;

    bool fires(std::span<const double> x) const;
};

struct KBLabel {
    int id = 0;
    std::string name;
    bool active = true;
};

/// One refinement applied on top of the base layer. Splits reconsider points
/// concluding `parent` with their own rules; merges rename `pair` to `into`.
struct RefinementStep {
    ProvenanceKind kind = ProvenanceKind::split;
    int parent = -1;
    std::vector<std::string> rule_ids;
    std::pair<int, int> pair{-1, -1};
    int into = -1;
};

struct HistoryEntry {
    int version = 0;
    std::string op;
    nlohmann::json detail;
};

/// Versioned, immutable-by-convention rule base. Every mutating operation
/// returns a copy whose version is exactly one higher.
///
/// Inference runs in layers. The base layer is the most confident enabled
/// expert rule that fires; when none fires it falls back to the per-row fact
/// table (if the base was built from raw labels) and then to default_label.
/// The refinement steps are then replayed in order.
struct KnowledgeBase {
    std::vector<std::string> features;
    std::vector<KBLabel> labels;
    std::vector<KBRule> rules;
    std::vector<RefinementStep> steps;
    std::vector<int> base_labels;
    std::optional<int> default_label;
    int version = 0;
    std::vector<HistoryEntry> history;
    int next_rule = 1;

    const KBLabel* find_label(int id) const;
    const KBLabel* find_label(const std::string& name) const;
    int label_id(const std::string& name) const;  // throws when unknown
    bool is_active(int id) const;
    std::vector<int> active_labels() const;
    std::string fresh_label_name() const;
};

struct Inference {
    int label = kUnlabeled;
    double confidence = 0.0;
};

/// Empty rule base over `features` with the given label names (ids 0..k-1).
KnowledgeBase make_knowledge_base(std::vector<std::string> features, const std::vector<std::string>& label_names);

/// Rule base whose base layer is a per-row fact table, used when the expert
/// provides labels instead of rules.
KnowledgeBase knowledge_base_from_labels(std::vector<std::string> features, std::vector<int> row_labels,
                                         const std::vector<std::string>& label_names);

Inference infer(const KnowledgeBase& kb, std::span<const double> instance, std::optional<std::size_t> row = {});

/// Rule confidence is precision * coverage.
KBRule make_rule(const KnowledgeBase& kb, const ExplanationRule& rule, int conclusion, Provenance provenance);

KnowledgeBase add_label(const KnowledgeBase& kb, const std::string& name);
KnowledgeBase add_rule(const KnowledgeBase& kb, KBRule rule);
KnowledgeBase import_explanation(const KnowledgeBase& kb, const ExplanationRule& rule, int as_label,
                                 Provenance provenance = {});

/// Creates one label per entry of `rules` (name, rule) and scopes the rules to
/// points concluding `parent`. Points none of them fire on keep `parent`.
KnowledgeBase apply_split(const KnowledgeBase& kb, int parent,
                          const std::vector<std::pair<std::string, KBRule>>& rules,
                          const std::string& recommendation_id = {});

/// Rewrites every rule concluding either label of `pair` to conclude
/// `new_label` (created unless an active label already has that name) and
/// retires both labels.
KnowledgeBase apply_merge(const KnowledgeBase& kb, std::pair<int, int> pair, const std::string& new_label,
                          const std::string& recommendation_id = {});

KnowledgeBase set_confidence(const KnowledgeBase& kb, const std::string& rule_id, double confidence);
KnowledgeBase set_enabled(const KnowledgeBase& kb, const std::string& rule_id, bool enabled);
KnowledgeBase set_default_label(const KnowledgeBase& kb, std::optional<int> label);

/// Row-wise inference; rows no rule labels get kUnlabeled.
std::vector<int> label_dataset(const KnowledgeBase& kb, const RealMatrix& features);
std::vector<int> label_dataset(const KnowledgeBase& kb, const LabeledDataset& ds);

/// Plain-text listing, one rule per line.
std::string render_rules(const KnowledgeBase& kb);
/// Decision-table rendering: one table per rule group, columns are the
/// condition attributes followed by the conclusion and its confidence.
std::string render_tables(const KnowledgeBase& kb);

const char* to_string(ProvenanceKind kind);

void to_json(nlohmann::json& j, const KnowledgeBase& kb);
void from_json(const nlohmann::json& j, KnowledgeBase& kb);
std::string dump_knowledge_base(const KnowledgeBase& kb);

}  // namespace knac
