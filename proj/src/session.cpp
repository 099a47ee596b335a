#include "knac/session.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "knac/contingency.hpp"

namespace knac {

namespace {

LabelNames names_of(const Session& s) { return LabelNames::of(s.dataset); }

void relabel(Session& s) {
    ExpertView view = expert_view(s.kb, s.dataset.features);
    s.dataset.expert_labels = std::move(view.labels);
    s.dataset.expert_names = std::move(view.names);
    s.expert_kb_ids = std::move(view.kb_ids);
}

bool involves_unlabeled(const Session& s, int expert_index) { return s.expert_kb_ids.at(expert_index) < 0; }

void compute_pending(Session& s) {
    s.pending.clear();
    const LabeledDataset& ds = s.dataset;
    const RecommendParams& p = s.config.params;
    const ContingencyMatrix cm = contingency(ds);
    const std::string prefix = "i" + std::to_string(s.iteration) + "-";

    const SplitMatrix h = split_matrix(cm, p.axis_mode);
    std::size_t n = 0;
    for (SplitRecommendation& rec : recommend_splits(ds, h, p)) {
        if (involves_unlabeled(s, rec.expert_label)) continue;
        PendingRecommendation pr{prefix + "s" + std::to_string(n++), {}, explain_split(ds, rec, s.config.rules)};
        pr.body = std::move(rec);
        s.pending.push_back(std::move(pr));
    }
    if (ds.expert_count() < 2) return;
    const MergeMatrix mm = merge_matrix(cm);
    n = 0;
    for (MergeRecommendation& rec : merge_candidates(ds, cm, mm, p)) {
        if (involves_unlabeled(s, rec.first) || involves_unlabeled(s, rec.second)) continue;
        const auto [a, b] = explain_merge(ds, rec, s.config.rules);
        PendingRecommendation pr{prefix + "m" + std::to_string(n++), {}, {a, b}};
        pr.body = rec;
        s.pending.push_back(std::move(pr));
    }
}

IterationRecord measure(const Session& s, std::size_t accepted, std::vector<std::string> skipped) {
    IterationRecord r;
    r.iteration = s.iteration;
    r.kb_version = s.kb.version;
    r.expert_clusters = s.dataset.expert_count();
    r.accepted = accepted;
    r.skipped = std::move(skipped);
    r.vs_clusters = agreement(s.dataset.expert_labels, s.dataset.cluster_labels);
    if (!s.reference_labels.empty()) r.vs_reference = agreement(s.reference_labels, s.dataset.expert_labels);
    return r;
}

// Names for `count` new labels, unique against the rule base and each other.
std::vector<std::string> fresh_names(const KnowledgeBase& kb, std::size_t count) {
    std::vector<std::string> out;
    int next = kb.labels.empty() ? 0 : kb.labels.back().id + 1;
    while (out.size() < count) {
        std::string name = std::to_string(next++);
        if (!kb.find_label(name) && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    }
    return out;
}

void validate_decisions(const Session& s, const std::vector<Decision>& decisions) {
    std::set<std::string> seen;
    for (const Decision& d : decisions) {
        if (!s.find_pending(d.recommendation_id))
            throw SessionError("stale_recommendation",
                               "recommendation '" + d.recommendation_id + "' is not pending in iteration " +
                                   std::to_string(s.iteration));
        if (!seen.insert(d.recommendation_id).second)
            throw SessionError("duplicate_decision", "more than one decision for '" + d.recommendation_id + "'");
    }
}

nlohmann::json pending_state(const PendingRecommendation& pr, const LabelNames& names) {
    nlohmann::json body = pr.is_split() ? to_json(std::get<SplitRecommendation>(pr.body), names)
                                        : to_json(std::get<MergeRecommendation>(pr.body), names);
    return {{"id", pr.id}, {"recommendation", body}, {"rules", pr.rules}};
}

std::string rule_label_text(const Session& s, const PendingRecommendation& pr, const ExplanationRule& rule) {
    const LabelNames names = names_of(s);
    return pr.is_split() ? "C_" + names.cluster.at(rule.target_label) : "E_" + names.expert.at(rule.target_label);
}

}  // namespace

double PendingRecommendation::confidence() const {
    return std::visit([](const auto& r) { return r.confidence; }, body);
}

const PendingRecommendation* Session::find_pending(const std::string& rid) const {
    for (const auto& p : pending)
        if (p.id == rid) return &p;
    return nullptr;
}

ExpertView expert_view(const KnowledgeBase& kb, const RealMatrix& features) {
    const std::vector<int> raw = label_dataset(kb, features);
    std::set<int> present(raw.begin(), raw.end());
    ExpertView view;
    std::map<int, int> index;
    for (int id : present) {
        if (id == kUnlabeled) continue;
        index[id] = static_cast<int>(view.kb_ids.size());
        view.kb_ids.push_back(id);
        view.names.push_back(kb.find_label(id)->name);
    }
    if (present.count(kUnlabeled)) {
        index[kUnlabeled] = static_cast<int>(view.kb_ids.size());
        view.kb_ids.push_back(kUnlabeled);
        view.names.push_back("unlabeled");
    }
    view.labels.reserve(raw.size());
    for (int id : raw) view.labels.push_back(index.at(id));
    return view;
}

Session start(std::string id, const LabeledDataset& ds, const SessionConfig& config, const StartOptions& options) {
    config.params.validate();
    Session s;
    s.id = std::move(id);
    s.config = config;
    s.dataset = ds;
    if (!s.dataset.clustered()) {
        if (!options.clusterer)
            throw SessionError("missing_clusters", "dataset has no cluster labels and no clusterer is configured");
        s.dataset = with_cluster_labels(s.dataset, kmeans(s.dataset.features, *options.clusterer));
    }
    if (!options.reference_labels.empty() && options.reference_labels.size() != ds.size())
        throw SessionError("validation", "reference labels do not match the dataset size");
    s.reference_labels = options.reference_labels;
    s.initial_kb = options.kb ? *options.kb
                              : knowledge_base_from_labels(ds.feature_names, ds.expert_labels, ds.expert_names);
    if (s.initial_kb.features != ds.feature_names)
        throw SessionError("validation", "rule base schema does not match the dataset features");
    s.kb = s.initial_kb;
    relabel(s);
    compute_pending(s);
    s.metrics_history.push_back(measure(s, 0, {}));
    return s;
}

Session iterate(const Session& session, const std::vector<Decision>& decisions) {
    if (session.converged) throw SessionError("converged", "session has already converged");
    validate_decisions(session, decisions);

    Session s = session;
    std::vector<const PendingRecommendation*> splits, merges;
    std::size_t accepted = 0;
    for (const PendingRecommendation& pr : session.pending) {
        const auto it = std::find_if(decisions.begin(), decisions.end(),
                                     [&](const Decision& d) { return d.recommendation_id == pr.id; });
        if (it == decisions.end() || it->verdict != Verdict::accept) continue;
        ++accepted;
        (pr.is_split() ? splits : merges).push_back(&pr);
    }

    std::set<int> touched;
    for (const PendingRecommendation* pr : splits) {
        const auto& rec = std::get<SplitRecommendation>(pr->body);
        const int parent = session.expert_kb_ids.at(rec.expert_label);
        const auto names = fresh_names(s.kb, rec.candidates.size());
        std::vector<std::pair<std::string, KBRule>> rules;
        for (std::size_t c = 0; c < rec.candidates.size(); ++c)
            rules.emplace_back(names[c], make_rule(s.kb, pr->rules.at(c), parent,
                                                   {ProvenanceKind::split, parent, {-1, -1}, pr->id}));
        s.kb = apply_split(s.kb, parent, rules, pr->id);
        touched.insert(parent);
    }
    std::vector<std::string> skipped;
    for (const PendingRecommendation* pr : merges) {
        const auto& rec = std::get<MergeRecommendation>(pr->body);
        const int a = session.expert_kb_ids.at(rec.first);
        const int b = session.expert_kb_ids.at(rec.second);
        if (touched.count(a) || touched.count(b)) {
            skipped.push_back(pr->id);
            continue;
        }
        const std::string into = fresh_names(s.kb, 1).front();
        s.kb = apply_merge(s.kb, {a, b}, into, pr->id);
        touched.insert({a, b, s.kb.label_id(into)});
    }

    for (const Decision& d : decisions) s.decision_log.push_back({session.iteration, d});
    s.iterate_log.push_back(session.iteration);
    s.draft.clear();
    ++s.iteration;
    relabel(s);
    compute_pending(s);
    s.metrics_history.push_back(measure(s, accepted, std::move(skipped)));
    s.converged = accepted == 0;
    if (s.converged) s.status = SessionStatus::converged;
    return s;
}

Session record_decisions(const Session& session, const std::vector<Decision>& decisions, const std::string& token) {
    if (token != session.token())
        throw SessionError("stale_token", "iteration token '" + token + "' does not match '" + session.token() + "'");
    if (session.converged) throw SessionError("converged", "session has already converged");
    validate_decisions(session, decisions);
    Session s = session;
    for (const Decision& d : decisions) {
        const auto it = std::find_if(s.draft.begin(), s.draft.end(), [&](const Decision& x) {
            return x.recommendation_id == d.recommendation_id;
        });
        if (it != s.draft.end())
            *it = d;
        else
            s.draft.push_back(d);
    }
    return s;
}

Session auto_expert(const Session& session, double accept_threshold) {
    if (!(accept_threshold >= 0.0 && accept_threshold <= 1.01))
        throw SessionError("validation", "accept threshold must lie in [0, 1.01]");
    Session s = session;
    std::size_t rounds = 0;
    while (!s.converged) {
        if (rounds >= s.config.max_iterations) {
            s.status = SessionStatus::iteration_cap;
            break;
        }
        std::vector<Decision> decisions;
        for (const PendingRecommendation& pr : s.pending)
            decisions.push_back({pr.id, pr.confidence() >= accept_threshold ? Verdict::accept : Verdict::reject,
                                 "confidence " + format_fixed2(pr.confidence()), "auto_expert", ""});
        s = iterate(s, decisions);
        ++rounds;
    }
    return s;
}

Session replay(const Session& session) {
    StartOptions options;
    options.kb = session.initial_kb;
    options.reference_labels = session.reference_labels;
    Session s = start(session.id, session.dataset, session.config, options);
    for (int it : session.iterate_log) {
        std::vector<Decision> decisions;
        for (const LoggedDecision& d : session.decision_log)
            if (d.iteration == it) decisions.push_back(d.decision);
        s = iterate(s, decisions);
    }
    s.status = session.status;
    return s;
}

nlohmann::json recommendation_json(const Session& session, const PendingRecommendation& pr) {
    const LabelNames names = names_of(session);
    nlohmann::json j = pr.is_split() ? to_json(std::get<SplitRecommendation>(pr.body), names)
                                     : to_json(std::get<MergeRecommendation>(pr.body), names);
    j["id"] = pr.id;
    nlohmann::json rules = nlohmann::json::array();
    for (const ExplanationRule& r : pr.rules) {
        nlohmann::json rj = r;
        rj["text"] = render(r, rule_label_text(session, pr, r));
        rules.push_back(std::move(rj));
    }
    j["explanation"] = std::move(rules);
    return j;
}

nlohmann::json explanation_json(const Session& session, const PendingRecommendation& pr) {
    const LabeledDataset& ds = session.dataset;
    nlohmann::json rules = nlohmann::json::array();
    for (const ExplanationRule& r : pr.rules) rules.push_back(rule_with_masks(r, ds.features, rule_label_text(session, pr, r)));

    nlohmann::json boxes = nlohmann::json::array();
    if (pr.is_split()) {
        const auto& rec = std::get<SplitRecommendation>(pr.body);
        std::vector<int> labels(ds.size(), kUnsetLabel);
        for (std::size_t r = 0; r < ds.size(); ++r)
            if (ds.expert_labels[r] == rec.expert_label) labels[r] = ds.cluster_labels[r];
        for (int c : rec.candidates) {
            nlohmann::json b = bounding_box(ds.features, labels, c);
            b["text"] = "C_" + ds.cluster_names.at(c);
            boxes.push_back(std::move(b));
        }
    } else {
        const auto& rec = std::get<MergeRecommendation>(pr.body);
        for (int e : {rec.first, rec.second}) {
            nlohmann::json b = bounding_box(ds, e);
            b["text"] = "E_" + ds.expert_names.at(e);
            boxes.push_back(std::move(b));
        }
    }
    return {{"id", pr.id},
            {"type", pr.is_split() ? "split" : "merge"},
            {"feature_names", ds.feature_names},
            {"rules", rules},
            {"bounding_boxes", boxes}};
}

nlohmann::json metrics_json(const Session& session) {
    return {{"id", session.id}, {"history", session.metrics_history}};
}

nlohmann::json session_view(const Session& session) {
    const ContingencyMatrix cm = contingency(session.dataset);
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& pr : session.pending) recs.push_back(recommendation_json(session, pr));
    return {{"id", session.id},
            {"iteration", session.iteration},
            {"token", session.token()},
            {"converged", session.converged},
            {"status", to_string(session.status)},
            {"kb_version", session.kb.version},
            {"params", session.config.params},
            {"contingency", cm},
            {"h_split", split_matrix(cm, session.config.params.axis_mode)},
            {"h_merge", merge_matrix(cm)},
            {"recommendations", recs},
            {"draft_decisions", session.draft},
            {"metrics_history", session.metrics_history}};
}

const char* to_string(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

Verdict verdict_from_string(const std::string& s) {
    if (s == "accept") return Verdict::accept;
    if (s == "reject") return Verdict::reject;
    throw SessionError("validation", "verdict must be 'accept' or 'reject', got '" + s + "'");
}

const char* to_string(SessionStatus s) {
    switch (s) {
    case SessionStatus::open: return "open";
    case SessionStatus::converged: return "converged";
    case SessionStatus::iteration_cap: return "iteration_cap";
    }
    return "open";
}

namespace {

SessionStatus status_from_string(const std::string& s) {
    if (s == "open") return SessionStatus::open;
    if (s == "converged") return SessionStatus::converged;
    if (s == "iteration_cap") return SessionStatus::iteration_cap;
    throw SessionError("validation", "unknown session status '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const Decision& d) {
    j = {{"recommendation_id", d.recommendation_id},
         {"verdict", to_string(d.verdict)},
         {"note", d.note},
         {"actor", d.actor},
         {"timestamp", d.timestamp}};
}

void from_json(const nlohmann::json& j, Decision& d) {
    if (!j.is_object()) throw SessionError("validation", "decision must be an object");
    if (!j.contains("recommendation_id") || !j.at("recommendation_id").is_string())
        throw SessionError("validation", "decision needs a string recommendation_id");
    if (!j.contains("verdict") || !j.at("verdict").is_string())
        throw SessionError("validation", "decision needs a verdict");
    d.recommendation_id = j.at("recommendation_id").get<std::string>();
    d.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    d.note = j.value("note", std::string{});
    d.actor = j.value("actor", std::string("expert"));
    d.timestamp = j.value("timestamp", std::string{});
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
    j = {{"iteration", r.iteration},
         {"kb_version", r.kb_version},
         {"expert_clusters", r.expert_clusters},
         {"accepted", r.accepted},
         {"skipped", r.skipped},
         {"vs_clusters", r.vs_clusters},
         {"vs_reference", r.vs_reference ? nlohmann::json(*r.vs_reference) : nlohmann::json()}};
}

void from_json(const nlohmann::json& j, IterationRecord& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("kb_version").get_to(r.kb_version);
    j.at("expert_clusters").get_to(r.expert_clusters);
    j.at("accepted").get_to(r.accepted);
    j.at("skipped").get_to(r.skipped);
    j.at("vs_clusters").get_to(r.vs_clusters);
    if (!j.at("vs_reference").is_null()) r.vs_reference = j.at("vs_reference").get<AgreementScores>();
}

void to_json(nlohmann::json& j, const SessionConfig& c) {
    j = {{"params", c.params}, {"rules", c.rules}, {"max_iterations", c.max_iterations}};
}

void from_json(const nlohmann::json& j, SessionConfig& c) {
    c = SessionConfig{};
    if (j.contains("params")) j.at("params").get_to(c.params);
    if (j.contains("rules")) j.at("rules").get_to(c.rules);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
}

nlohmann::json session_state_json(const Session& s) {
    const LabelNames names = names_of(s);
    nlohmann::json pending = nlohmann::json::array();
    for (const auto& pr : s.pending) pending.push_back(pending_state(pr, names));
    nlohmann::json log = nlohmann::json::array();
    for (const auto& d : s.decision_log) {
        nlohmann::json dj = d.decision;
        dj["iteration"] = d.iteration;
        log.push_back(std::move(dj));
    }
    return {{"id", s.id},
            {"config", s.config},
            {"iteration", s.iteration},
            {"converged", s.converged},
            {"status", to_string(s.status)},
            {"initial_kb", s.initial_kb},
            {"kb", s.kb},
            {"pending", pending},
            {"draft", s.draft},
            {"decision_log", log},
            {"iterate_log", s.iterate_log},
            {"metrics_history", s.metrics_history}};
}

Session session_from_state(const nlohmann::json& j, LabeledDataset dataset, std::vector<int> reference) {
    Session s;
    j.at("id").get_to(s.id);
    j.at("config").get_to(s.config);
    j.at("iteration").get_to(s.iteration);
    j.at("converged").get_to(s.converged);
    s.status = status_from_string(j.at("status").get<std::string>());
    j.at("initial_kb").get_to(s.initial_kb);
    j.at("kb").get_to(s.kb);
    s.dataset = std::move(dataset);
    s.reference_labels = std::move(reference);
    relabel(s);
    for (const auto& pj : j.at("pending")) {
        PendingRecommendation pr;
        pj.at("id").get_to(pr.id);
        const auto& body = pj.at("recommendation");
        if (body.at("type") == "split")
            pr.body = split_from_json(body);
        else
            pr.body = merge_from_json(body);
        pj.at("rules").get_to(pr.rules);
        s.pending.push_back(std::move(pr));
    }
    j.at("draft").get_to(s.draft);
    for (const auto& dj : j.at("decision_log")) s.decision_log.push_back({dj.at("iteration").get<int>(), dj.get<Decision>()});
    j.at("iterate_log").get_to(s.iterate_log);
    j.at("metrics_history").get_to(s.metrics_history);
    return s;
}

}  // namespace knac
