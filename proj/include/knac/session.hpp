#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "knac/dataset.hpp"
#include "knac/explain.hpp"
#include "knac/kmeans.hpp"
#include "knac/metrics.hpp"
#include "knac/recommend.hpp"
#include "knac/rulebase.hpp"

namespace knac {

/// Error with a stable machine-readable code, e.g. "stale_recommendation".
class SessionError : public std::runtime_error {
public:
    SessionError(std::string code, const std::string& what) : std::runtime_error(what), code(std::move(code)) {}
    std::string code;
};

enum class Verdict { accept, reject };

struct Decision {
    std::string recommendation_id;
    Verdict verdict = Verdict::reject;
    std::string note;
    std::string actor = "expert";
    std::string timestamp;
};

struct LoggedDecision {
    int iteration = 0;
    Decision decision;
};

/// A recommendation waiting for the expert, together with its justification.
/// Label ids inside `body` index the expert labelling of the iteration that
/// produced it; `expert_kb_ids` maps them back to rule-base labels.
struct PendingRecommendation {
    std::string id;
    std::variant<SplitRecommendation, MergeRecommendation> body;
    std::vector<ExplanationRule> rules;

    bool is_split() const { return std::holds_alternative<SplitRecommendation>(body); }
    double confidence() const;
};

struct IterationRecord {
    int iteration = 0;
    int kb_version = 0;
    std::size_t expert_clusters = 0;
    std::size_t accepted = 0;
    std::vector<std::string> skipped;        // accepted merges left for the next round
    AgreementScores vs_clusters;             // expert labelling against the auto clustering
    std::optional<AgreementScores> vs_reference;
};

struct SessionConfig {
    RecommendParams params;
    RuleConfig rules;
    std::size_t max_iterations = 20;
};

enum class SessionStatus { open, converged, iteration_cap };

struct Session {
    std::string id;
    LabeledDataset dataset;                 // expert labels mirror the current rule base
    std::vector<int> reference_labels;      // optional ground truth, empty when absent
    SessionConfig config;
    KnowledgeBase initial_kb;
    KnowledgeBase kb;
    std::vector<int> expert_kb_ids;         // expert index -> rule-base label id (-1: unlabeled rows)
    std::vector<PendingRecommendation> pending;
    std::vector<Decision> draft;            // recorded but not yet applied
    std::vector<LoggedDecision> decision_log;
    std::vector<int> iterate_log;           // iterations that were closed, in order
    std::vector<IterationRecord> metrics_history;
    int iteration = 0;
    bool converged = false;
    SessionStatus status = SessionStatus::open;

    std::string token() const { return "it-" + std::to_string(iteration); }
    const PendingRecommendation* find_pending(const std::string& rid) const;
};

struct StartOptions {
    std::optional<KnowledgeBase> kb;            // otherwise built from the dataset's expert labels
    std::optional<KMeansConfig> clusterer;      // used when the dataset carries no cluster labels
    std::vector<int> reference_labels;
};

Session start(std::string id, const LabeledDataset& ds, const SessionConfig& config, const StartOptions& options = {});

/// Closes the current iteration: accepted splits are applied first, then
/// accepted merges whose labels no split (or earlier merge) of this round
/// touched. The session converges when no decision is an accept.
Session iterate(const Session& session, const std::vector<Decision>& decisions);

/// Validates decisions against the pending list and the iteration token and
/// stores them as drafts (one per recommendation, later ones replace earlier).
Session record_decisions(const Session& session, const std::vector<Decision>& decisions, const std::string& token);

/// Scripted expert: accepts every pending recommendation with confidence at
/// or above `accept_threshold` until convergence or the iteration cap.
Session auto_expert(const Session& session, double accept_threshold);

/// Rebuilds a session from its initial state by re-applying the decision log.
Session replay(const Session& session);

/// Canonical expert labelling derived from the rule base.
struct ExpertView {
    std::vector<int> labels;
    std::vector<std::string> names;
    std::vector<int> kb_ids;
};
ExpertView expert_view(const KnowledgeBase& kb, const RealMatrix& features);

/// Rules, condition masks and bounding boxes backing one recommendation.
nlohmann::json explanation_json(const Session& session, const PendingRecommendation& rec);
nlohmann::json recommendation_json(const Session& session, const PendingRecommendation& rec);
/// Read-only projection served by the HTTP API and written by the CLI.
nlohmann::json session_view(const Session& session);
nlohmann::json metrics_json(const Session& session);

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);
const char* to_string(SessionStatus s);

void to_json(nlohmann::json& j, const Decision& d);
void from_json(const nlohmann::json& j, Decision& d);
void to_json(nlohmann::json& j, const IterationRecord& r);
void from_json(const nlohmann::json& j, IterationRecord& r);
void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

/// session.json payload (the dataset lives in sibling CSV files).
nlohmann::json session_state_json(const Session& session);
Session session_from_state(const nlohmann::json& state, LabeledDataset dataset, std::vector<int> reference);

}  // namespace knac
