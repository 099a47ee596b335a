#include "knac/rulebase.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace knac {

namespace {

KnowledgeBase bumped(const KnowledgeBase& kb, std::string op, nlohmann::json detail) {
    KnowledgeBase out = kb;
    out.version = kb.version + 1;
    out.history.push_back({out.version, std::move(op), std::move(detail)});
    return out;
}

std::size_t feature_index(const KnowledgeBase& kb, const std::string& name) {
    const auto it = std::find(kb.features.begin(), kb.features.end(), name);
    if (it == kb.features.end()) throw KnowledgeBaseError("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - kb.features.begin());
}

void bind_conditions(const KnowledgeBase& kb, std::vector<Condition>& conditions) {
    for (Condition& c : conditions) {
        c.index = feature_index(kb, c.feature);
        if (c.op == ConditionOp::in_interval && c.upper < c.value)
            throw KnowledgeBaseError("condition on '" + c.feature + "' has an empty interval");
    }
}

void require_active(const KnowledgeBase& kb, int id) {
    if (!kb.is_active(id)) throw KnowledgeBaseError("unknown or retired label id " + std::to_string(id));
}

KBLabel& push_label(KnowledgeBase& kb, const std::string& name) {
    if (kb.find_label(name)) throw KnowledgeBaseError("label name '" + name + "' already exists");
    const int id = kb.labels.empty() ? 0 : kb.labels.back().id + 1;
    kb.labels.push_back({id, name, true});
    return kb.labels.back();
}

// Most confident enabled firing rule among `ids` (all expert rules when
// `ids` is null). Ties go to the earliest rule.
const KBRule* strongest(const KnowledgeBase& kb, std::span<const double> x, const std::vector<std::string>* ids) {
    const KBRule* best = nullptr;
    for (const KBRule& r : kb.rules) {
        if (!r.enabled) continue;
        if (ids ? std::find(ids->begin(), ids->end(), r.id) == ids->end()
                : r.provenance.kind != ProvenanceKind::expert)
            continue;
        if (!r.fires(x)) continue;
        if (!best || r.confidence > best->confidence) best = &r;
    }
    return best;
}

std::string label_text(const KnowledgeBase& kb, int id) {
    const KBLabel* l = kb.find_label(id);
    return "E_" + (l ? l->name : std::to_string(id));
}

}  // namespace

bool KBRule::fires(std::span<const double> x) const {
    return std::all_of(conditions.begin(), conditions.end(), [&](const Condition& c) { return c.holds(x); });
}

const KBLabel* KnowledgeBase::find_label(int id) const {
    for (const auto& l : labels)
        if (l.id == id) return &l;
    return nullptr;
}

const KBLabel* KnowledgeBase::find_label(const std::string& name) const {
    for (const auto& l : labels)
        if (l.name == name) return &l;
    return nullptr;
}

int KnowledgeBase::label_id(const std::string& name) const {
    const KBLabel* l = find_label(name);
    if (!l) throw KnowledgeBaseError("unknown label '" + name + "'");
    return l->id;
}

bool KnowledgeBase::is_active(int id) const {
    const KBLabel* l = find_label(id);
    return l && l->active;
}

std::vector<int> KnowledgeBase::active_labels() const {
    std::vector<int> out;
    for (const auto& l : labels)
        if (l.active) out.push_back(l.id);
    return out;
}

std::string KnowledgeBase::fresh_label_name() const {
    const int id = labels.empty() ? 0 : labels.back().id + 1;
    std::string name = std::to_string(id);
    for (int suffix = 1; find_label(name); ++suffix) name = std::to_string(id) + "_" + std::to_string(suffix);
    return name;
}

KnowledgeBase make_knowledge_base(std::vector<std::string> features, const std::vector<std::string>& label_names) {
    if (features.empty()) throw KnowledgeBaseError("knowledge base needs at least one feature");
    KnowledgeBase kb;
    kb.features = std::move(features);
    for (const auto& name : label_names) push_label(kb, name);
    return kb;
}

KnowledgeBase knowledge_base_from_labels(std::vector<std::string> features, std::vector<int> row_labels,
                                         const std::vector<std::string>& label_names) {
    KnowledgeBase kb = make_knowledge_base(std::move(features), label_names);
    for (int l : row_labels)
        if (l < 0 || static_cast<std::size_t>(l) >= label_names.size())
            throw KnowledgeBaseError("row label id out of range: " + std::to_string(l));
    kb.base_labels = std::move(row_labels);
    return kb;
}

Inference infer(const KnowledgeBase& kb, std::span<const double> instance, std::optional<std::size_t> row) {
    if (instance.size() != kb.features.size())
        throw KnowledgeBaseError("instance has " + std::to_string(instance.size()) + " features, schema has " +
                                 std::to_string(kb.features.size()));
    Inference result;
    if (const KBRule* r = strongest(kb, instance, nullptr)) {
        result = {r->asserted_conclusion, r->confidence};
    } else if (row && !kb.base_labels.empty()) {
        if (*row >= kb.base_labels.size()) throw KnowledgeBaseError("row index outside the fact table");
        result = {kb.base_labels[*row], 1.0};
    } else if (kb.default_label) {
        result = {*kb.default_label, 0.0};
    } else {
        return result;
    }

    for (const RefinementStep& step : kb.steps) {
        if (step.kind == ProvenanceKind::split) {
            if (result.label != step.parent) continue;
            if (const KBRule* r = strongest(kb, instance, &step.rule_ids)) result = {r->asserted_conclusion, r->confidence};
        } else if (result.label == step.pair.first || result.label == step.pair.second) {
            result.label = step.into;
        }
    }
    return result;
}

KBRule make_rule(const KnowledgeBase& kb, const ExplanationRule& rule, int conclusion, Provenance provenance) {
    KBRule out;
    out.id = "r" + std::to_string(kb.next_rule);
    out.conditions = rule.conditions;
    bind_conditions(kb, out.conditions);
    out.conclusion = conclusion;
    out.asserted_conclusion = conclusion;
    out.confidence = rule.precision * rule.coverage;
    out.provenance = std::move(provenance);
    return out;
}

KnowledgeBase add_label(const KnowledgeBase& kb, const std::string& name) {
    KnowledgeBase out = bumped(kb, "add_label", {{"name", name}});
    push_label(out, name);
    return out;
}

KnowledgeBase add_rule(const KnowledgeBase& kb, KBRule rule) {
    require_active(kb, rule.conclusion);
    if (rule.confidence < 0.0 || rule.confidence > 1.0) throw KnowledgeBaseError("rule confidence outside [0, 1]");
    bind_conditions(kb, rule.conditions);
    rule.id = "r" + std::to_string(kb.next_rule);
    rule.asserted_conclusion = rule.conclusion;
    rule.provenance.kind = ProvenanceKind::expert;
    KnowledgeBase out = bumped(kb, "add_rule", {{"rule", rule.id}, {"conclusion", rule.conclusion}});
    out.rules.push_back(std::move(rule));
    ++out.next_rule;
    return out;
}

KnowledgeBase import_explanation(const KnowledgeBase& kb, const ExplanationRule& rule, int as_label,
                                 Provenance provenance) {
    require_active(kb, as_label);
    KBRule r = make_rule(kb, rule, as_label, std::move(provenance));
    KnowledgeBase out = bumped(kb, "import_explanation",
                               {{"rule", r.id}, {"conclusion", as_label}, {"confidence", r.confidence}});
    out.rules.push_back(std::move(r));
    ++out.next_rule;
    return out;
}

KnowledgeBase apply_split(const KnowledgeBase& kb, int parent,
                          const std::vector<std::pair<std::string, KBRule>>& rules,
                          const std::string& recommendation_id) {
    require_active(kb, parent);
    if (rules.size() < 2) throw KnowledgeBaseError("a split needs at least 2 new labels");
    std::set<std::string> names;
    for (const auto& [name, rule] : rules) {
        if (!names.insert(name).second) throw KnowledgeBaseError("duplicate new label '" + name + "'");
        if (kb.find_label(name)) throw KnowledgeBaseError("label '" + name + "' already exists");
    }

    nlohmann::json created = nlohmann::json::array();
    KnowledgeBase out = kb;
    RefinementStep step;
    step.kind = ProvenanceKind::split;
    step.parent = parent;
    for (const auto& [name, rule] : rules) {
        const int id = push_label(out, name).id;
        KBRule r = rule;
        bind_conditions(out, r.conditions);
        if (r.confidence < 0.0 || r.confidence > 1.0) throw KnowledgeBaseError("rule confidence outside [0, 1]");
        r.id = "r" + std::to_string(out.next_rule++);
        r.conclusion = id;
        r.asserted_conclusion = id;
        r.provenance = {ProvenanceKind::split, parent, {-1, -1}, recommendation_id};
        step.rule_ids.push_back(r.id);
        created.push_back({{"label", id}, {"name", name}, {"rule", r.id}});
        out.rules.push_back(std::move(r));
    }
    out.steps.push_back(std::move(step));
    out.version = kb.version + 1;
    out.history.push_back({out.version, "split",
                           {{"parent", parent}, {"created", created}, {"recommendation", recommendation_id}}});
    return out;
}

KnowledgeBase apply_merge(const KnowledgeBase& kb, std::pair<int, int> pair, const std::string& new_label,
                          const std::string& recommendation_id) {
    require_active(kb, pair.first);
    require_active(kb, pair.second);
    if (pair.first == pair.second) throw KnowledgeBaseError("cannot merge a label with itself");

    KnowledgeBase out = kb;
    int into = -1;
    if (const KBLabel* existing = out.find_label(new_label)) {
        if (!existing->active || existing->id == pair.first || existing->id == pair.second)
            throw KnowledgeBaseError("merge target '" + new_label + "' is not a usable label");
        into = existing->id;
    } else {
        into = push_label(out, new_label).id;
    }
    for (KBLabel& l : out.labels)
        if (l.id == pair.first || l.id == pair.second) l.active = false;
    for (KBRule& r : out.rules)
        if (r.conclusion == pair.first || r.conclusion == pair.second) r.conclusion = into;

    RefinementStep step;
    step.kind = ProvenanceKind::merge;
    step.pair = pair;
    step.into = into;
    out.steps.push_back(step);
    out.version = kb.version + 1;
    out.history.push_back({out.version, "merge",
                           {{"pair", {pair.first, pair.second}},
                            {"into", into},
                            {"mapping", {{std::to_string(pair.first), into}, {std::to_string(pair.second), into}}},
                            {"recommendation", recommendation_id}}});
    return out;
}

KnowledgeBase set_confidence(const KnowledgeBase& kb, const std::string& rule_id, double confidence) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw KnowledgeBaseError("rule confidence outside [0, 1]");
    KnowledgeBase out = bumped(kb, "set_confidence", {{"rule", rule_id}, {"confidence", confidence}});
    for (KBRule& r : out.rules)
        if (r.id == rule_id) {
            r.confidence = confidence;
            return out;
        }
    throw KnowledgeBaseError("unknown rule '" + rule_id + "'");
}

KnowledgeBase set_enabled(const KnowledgeBase& kb, const std::string& rule_id, bool enabled) {
    KnowledgeBase out = bumped(kb, "set_enabled", {{"rule", rule_id}, {"enabled", enabled}});
    for (KBRule& r : out.rules)
        if (r.id == rule_id) {
            r.enabled = enabled;
            return out;
        }
    throw KnowledgeBaseError("unknown rule '" + rule_id + "'");
}

KnowledgeBase set_default_label(const KnowledgeBase& kb, std::optional<int> label) {
    if (label) require_active(kb, *label);
    KnowledgeBase out = bumped(kb, "set_default_label", {{"label", label ? nlohmann::json(*label) : nlohmann::json()}});
    out.default_label = label;
    return out;
}

std::vector<int> label_dataset(const KnowledgeBase& kb, const RealMatrix& features) {
    if (features.cols() != kb.features.size())
        throw KnowledgeBaseError("dataset has " + std::to_string(features.cols()) + " features, schema has " +
                                 std::to_string(kb.features.size()));
    if (!kb.base_labels.empty() && kb.base_labels.size() != features.rows())
        throw KnowledgeBaseError("fact table covers " + std::to_string(kb.base_labels.size()) + " rows, dataset has " +
                                 std::to_string(features.rows()));
    std::vector<int> out(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) out[r] = infer(kb, features.row(r), r).label;
    return out;
}

std::vector<int> label_dataset(const KnowledgeBase& kb, const LabeledDataset& ds) {
    if (ds.feature_names != kb.features) throw KnowledgeBaseError("dataset feature names do not match the schema");
    return label_dataset(kb, ds.features);
}

std::string render_rules(const KnowledgeBase& kb) {
    std::string out;
    for (const KBRule& r : kb.rules) {
        std::string body;
        for (std::size_t i = 0; i < r.conditions.size(); ++i) {
            if (i) body += " AND ";
            body += render(r.conditions[i]);
        }
        if (body.empty()) body = "TRUE";
        std::string scope;
        if (r.provenance.kind == ProvenanceKind::split)
            scope = "[within " + label_text(kb, r.provenance.parent) + "] ";
        out += r.id + ": " + scope + "IF " + body + " THEN " + label_text(kb, r.conclusion) + " (Confidence " +
               format_fixed2(r.confidence) + ")" + (r.enabled ? "" : " [disabled]") + "\n";
    }
    for (const RefinementStep& s : kb.steps)
        if (s.kind == ProvenanceKind::merge)
            out += "MERGED " + label_text(kb, s.pair.first) + " WITH " + label_text(kb, s.pair.second) + " INTO " +
                   label_text(kb, s.into) + "\n";
    return out;
}

std::string render_tables(const KnowledgeBase& kb) {
    // Groups: expert rules, then one table per split step.
    std::vector<std::pair<std::string, std::vector<const KBRule*>>> groups;
    std::vector<const KBRule*> expert;
    for (const KBRule& r : kb.rules)
        if (r.provenance.kind == ProvenanceKind::expert) expert.push_back(&r);
    if (!expert.empty()) groups.emplace_back("expert rules", expert);
    for (const RefinementStep& s : kb.steps) {
        if (s.kind != ProvenanceKind::split) continue;
        std::vector<const KBRule*> members;
        for (const auto& id : s.rule_ids)
            for (const KBRule& r : kb.rules)
                if (r.id == id) members.push_back(&r);
        groups.emplace_back("split of " + label_text(kb, s.parent), members);
    }

    std::string out;
    for (const auto& [title, members] : groups) {
        std::vector<std::size_t> used;
        for (std::size_t f = 0; f < kb.features.size(); ++f)
            for (const KBRule* r : members)
                if (std::any_of(r->conditions.begin(), r->conditions.end(), [&](const Condition& c) { return c.index == f; })) {
                    used.push_back(f);
                    break;
                }
        std::vector<std::vector<std::string>> table;
        std::vector<std::string> header;
        for (std::size_t f : used) header.push_back("(?) " + kb.features[f]);
        header.push_back("(->) label");
        header.push_back("confidence");
        table.push_back(header);
        for (const KBRule* r : members) {
            std::vector<std::string> line;
            for (std::size_t f : used) {
                std::string cell;
                for (const Condition& c : r->conditions) {
                    if (c.index != f) continue;
                    if (!cell.empty()) cell += " and ";
                    const std::string atom = render(c);
                    cell += atom.substr(c.feature.size() + 1);
                }
                line.push_back(cell.empty() ? "any" : cell);
            }
            line.push_back(label_text(kb, r->conclusion));
            line.push_back(format_fixed2(r->confidence));
            table.push_back(line);
        }
        std::vector<std::size_t> width(header.size(), 0);
        for (const auto& line : table)
            for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
        out += "== " + title + " ==\n";
        for (const auto& line : table) {
            out += "|";
            for (std::size_t c = 0; c < line.size(); ++c)
                out += " " + line[c] + std::string(width[c] - line[c].size(), ' ') + " |";
            out += "\n";
        }
    }
    return out;
}

const char* to_string(ProvenanceKind kind) {
    switch (kind) {
    case ProvenanceKind::expert: return "expert";
    case ProvenanceKind::split: return "split";
    case ProvenanceKind::merge: return "merge";
    }
    return "expert";
}

namespace {

ProvenanceKind provenance_from_string(const std::string& s) {
    if (s == "expert") return ProvenanceKind::expert;
    if (s == "split") return ProvenanceKind::split;
    if (s == "merge") return ProvenanceKind::merge;
    throw KnowledgeBaseError("unknown provenance kind: " + s);
}

}  // namespace

void to_json(nlohmann::json& j, const KnowledgeBase& kb) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : kb.labels) labels.push_back({{"id", l.id}, {"name", l.name}, {"active", l.active}});

    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : kb.rules) {
        nlohmann::json prov = {{"kind", to_string(r.provenance.kind)}, {"recommendation", r.provenance.recommendation_id}};
        if (r.provenance.kind == ProvenanceKind::split) prov["parent"] = r.provenance.parent;
        if (r.provenance.kind == ProvenanceKind::merge) prov["pair"] = {r.provenance.pair.first, r.provenance.pair.second};
        rules.push_back({{"id", r.id},
                         {"conditions", r.conditions},
                         {"conclusion", r.conclusion},
                         {"asserted_conclusion", r.asserted_conclusion},
                         {"confidence", r.confidence},
                         {"provenance", prov},
                         {"enabled", r.enabled}});
    }

    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : kb.steps) {
        if (s.kind == ProvenanceKind::split)
            steps.push_back({{"kind", "split"}, {"parent", s.parent}, {"rules", s.rule_ids}});
        else
            steps.push_back({{"kind", "merge"}, {"pair", {s.pair.first, s.pair.second}}, {"into", s.into}});
    }

    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : kb.history) history.push_back({{"version", h.version}, {"op", h.op}, {"detail", h.detail}});

    j = {{"schema", {{"features", kb.features}}},
         {"labels", labels},
         {"rules", rules},
         {"steps", steps},
         {"base_labels", kb.base_labels},
         {"default_label", kb.default_label ? nlohmann::json(*kb.default_label) : nlohmann::json()},
         {"version", kb.version},
         {"history", history},
         {"next_rule", kb.next_rule}};
}

void from_json(const nlohmann::json& j, KnowledgeBase& kb) {
    kb = KnowledgeBase{};
    j.at("schema").at("features").get_to(kb.features);
    for (const auto& l : j.at("labels"))
        kb.labels.push_back({l.at("id").get<int>(), l.at("name").get<std::string>(), l.at("active").get<bool>()});
    for (const auto& r : j.at("rules")) {
        KBRule rule;
        r.at("id").get_to(rule.id);
        r.at("conditions").get_to(rule.conditions);
        bind_conditions(kb, rule.conditions);
        r.at("conclusion").get_to(rule.conclusion);
        rule.asserted_conclusion = r.value("asserted_conclusion", rule.conclusion);
        r.at("confidence").get_to(rule.confidence);
        const auto& p = r.at("provenance");
        rule.provenance.kind = provenance_from_string(p.at("kind").get<std::string>());
        rule.provenance.recommendation_id = p.value("recommendation", std::string{});
        if (p.contains("parent")) p.at("parent").get_to(rule.provenance.parent);
        if (p.contains("pair")) rule.provenance.pair = {p.at("pair").at(0).get<int>(), p.at("pair").at(1).get<int>()};
        r.at("enabled").get_to(rule.enabled);
        kb.rules.push_back(std::move(rule));
    }
    for (const auto& s : j.at("steps")) {
        RefinementStep step;
        step.kind = provenance_from_string(s.at("kind").get<std::string>());
        if (step.kind == ProvenanceKind::split) {
            s.at("parent").get_to(step.parent);
            s.at("rules").get_to(step.rule_ids);
        } else {
            step.pair = {s.at("pair").at(0).get<int>(), s.at("pair").at(1).get<int>()};
            s.at("into").get_to(step.into);
        }
        kb.steps.push_back(std::move(step));
    }
    j.at("base_labels").get_to(kb.base_labels);
    if (!j.at("default_label").is_null()) kb.default_label = j.at("default_label").get<int>();
    j.at("version").get_to(kb.version);
    for (const auto& h : j.at("history"))
        kb.history.push_back({h.at("version").get<int>(), h.at("op").get<std::string>(), h.at("detail")});
    j.at("next_rule").get_to(kb.next_rule);
}

std::string dump_knowledge_base(const KnowledgeBase& kb) { return nlohmann::json(kb).dump(2) + "\n"; }

}  // namespace knac
