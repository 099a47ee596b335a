#include "knac/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace knac {

namespace {

class Bits {
public:
    explicit Bits(std::size_t n = 0, bool fill = false)
        : n_(n), words_((n + 63) / 64, fill ? ~std::uint64_t{0} : 0) {
        if (fill && n % 64) words_.back() = (std::uint64_t{1} << (n % 64)) - 1;
    }
    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    Bits operator&(const Bits& o) const {
        Bits out(n_);
        for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] & o.words_[w];
        return out;
    }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    std::size_t count_and(const Bits& o) const {
        std::size_t c = 0;
        for (std::size_t w = 0; w < words_.size(); ++w) c += static_cast<std::size_t>(std::popcount(words_[w] & o.words_[w]));
        return c;
    }
    std::size_t count_and(const Bits& a, const Bits& b) const {
        std::size_t c = 0;
        for (std::size_t w = 0; w < words_.size(); ++w)
            c += static_cast<std::size_t>(std::popcount(words_[w] & a.words_[w] & b.words_[w]));
        return c;
    }

private:
    std::size_t n_;
    std::vector<std::uint64_t> words_;
};

struct Predicate {
    Condition cond;
    Bits mask;
};

struct Node {
    std::vector<std::size_t> chain;   // predicates in the order they were added
    std::vector<std::size_t> key;     // same, sorted; identifies the conjunction
    std::size_t matched = 0;
    std::size_t hits = 0;
};

// a has strictly higher precision than b
bool more_precise(std::size_t a_hits, std::size_t a_matched, std::size_t b_hits, std::size_t b_matched) {
    return static_cast<unsigned long long>(a_hits) * b_matched > static_cast<unsigned long long>(b_hits) * a_matched;
}

bool better(const Node& a, const Node& b) {
    if (more_precise(a.hits, a.matched, b.hits, b.matched)) return true;
    if (more_precise(b.hits, b.matched, a.hits, a.matched)) return false;
    if (a.matched != b.matched) return a.matched > b.matched;
    if (a.key.size() != b.key.size()) return a.key.size() < b.key.size();
    return a.key < b.key;
}

double quantile_sorted(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double pos = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

bool Condition::holds(std::span<const double> x) const {
    const double v = x[index];
    switch (op) {
    case ConditionOp::le: return v <= value;
    case ConditionOp::gt: return v > value;
    case ConditionOp::eq: return v == value;
    case ConditionOp::in_interval: return value <= v && v <= upper;
    }
    return false;
}

RuleStats evaluate_rule(const RealMatrix& features, std::span<const std::size_t> rows,
                        const std::vector<bool>& target, const std::vector<Condition>& conditions) {
    std::vector<std::size_t> owned;
    if (rows.empty()) {
        owned = all_rows(features.rows());
        rows = owned;
    }
    if (target.size() != rows.size()) throw std::invalid_argument("evaluate_rule: target size mismatch");
    RuleStats s;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto x = features.row(rows[i]);
        if (std::all_of(conditions.begin(), conditions.end(), [&](const Condition& c) { return c.holds(x); })) {
            ++s.matched;
            if (target[i]) ++hits;
        }
    }
    s.coverage = rows.empty() ? 0.0 : static_cast<double>(s.matched) / static_cast<double>(rows.size());
    s.precision = s.matched == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(s.matched);
    return s;
}

std::vector<double> quantile_cuts(std::vector<double> values, std::size_t grid) {
    std::sort(values.begin(), values.end());
    std::vector<double> cuts;
    for (std::size_t k = 1; k <= grid; ++k)
        cuts.push_back(quantile_sorted(values, static_cast<double>(k) / static_cast<double>(grid + 1)));
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
}

ExplanationRule induce_rule(const RealMatrix& features, const std::vector<std::string>& feature_names,
                            std::span<const std::size_t> rows_in, const std::vector<bool>& target,
                            const RuleConfig& config) {
    if (config.quantile_grid < 2) throw std::invalid_argument("induce_rule: quantile_grid must be at least 2");
    if (config.beam_width < 1) throw std::invalid_argument("induce_rule: beam_width must be at least 1");
    if (feature_names.size() != features.cols()) throw std::invalid_argument("induce_rule: feature name count mismatch");
    const std::vector<std::size_t> rows = rows_in.empty() ? all_rows(features.rows())
                                                          : std::vector<std::size_t>(rows_in.begin(), rows_in.end());
    const std::size_t n = rows.size();
    if (target.size() != n) throw std::invalid_argument("induce_rule: target size mismatch");
    const std::size_t positives = static_cast<std::size_t>(std::count(target.begin(), target.end(), true));
    if (positives == 0) throw std::invalid_argument("induce_rule: degenerate target (no positive rows)");

    Bits target_bits(n);
    for (std::size_t i = 0; i < n; ++i)
        if (target[i]) target_bits.set(i);

    // Candidate atoms in tie-break order: feature, threshold, then <= before >.
    std::vector<Predicate> preds;
    for (std::size_t f = 0; f < features.cols(); ++f) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = features(rows[i], f);
        const bool categorical =
            std::find(config.categorical.begin(), config.categorical.end(), f) != config.categorical.end();
        std::vector<std::pair<ConditionOp, double>> atoms;
        if (categorical) {
            std::vector<double> distinct = col;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            for (double v : distinct) atoms.emplace_back(ConditionOp::eq, v);
        } else {
            for (double q : quantile_cuts(col, config.quantile_grid)) {
                atoms.emplace_back(ConditionOp::le, q);
                atoms.emplace_back(ConditionOp::gt, q);
            }
        }
        for (const auto& [op, v] : atoms) {
            Predicate p{Condition{feature_names[f], f, op, v, 0.0}, Bits(n)};
            for (std::size_t i = 0; i < n; ++i)
                if (p.cond.holds(features.row(rows[i]))) p.mask.set(i);
            preds.push_back(std::move(p));
        }
    }

    const Bits everything(n, true);
    auto mask_of = [&](const std::vector<std::size_t>& chain) {
        Bits m = everything;
        for (std::size_t p : chain) m = m & preds[p].mask;
        return m;
    };
    auto reaches_target = [&](const Node& node) {
        return static_cast<double>(node.hits) >= config.precision_target * static_cast<double>(node.matched);
    };

    Node best{{}, {}, n, positives};
    std::vector<Node> beam{best};
    std::vector<Bits> beam_masks{everything};

    for (std::size_t level = 1; level <= config.max_conditions && !reaches_target(best); ++level) {
        std::vector<Node> next;
        std::set<std::vector<std::size_t>> seen;
        for (std::size_t b = 0; b < beam.size(); ++b) {
            const Node& parent = beam[b];
            const Bits& pmask = beam_masks[b];
            for (std::size_t p = 0; p < preds.size(); ++p) {
                if (std::find(parent.chain.begin(), parent.chain.end(), p) != parent.chain.end()) continue;
                const std::size_t matched = pmask.count_and(preds[p].mask);
                if (matched == 0 || matched == parent.matched) continue;  // empty or no-op atom
                const std::size_t hits = pmask.count_and(preds[p].mask, target_bits);
                // Growth never loses precision once a first atom is chosen.
                if (level > 1 && more_precise(parent.hits, parent.matched, hits, matched)) continue;
                Node child{parent.chain, parent.key, matched, hits};
                child.chain.push_back(p);
                child.key.insert(std::upper_bound(child.key.begin(), child.key.end(), p), p);
                if (!seen.insert(child.key).second) continue;
                next.push_back(std::move(child));
            }
        }
        if (next.empty()) break;
        const std::size_t keep = std::min(config.beam_width, next.size());
        std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(keep), next.end(), better);
        next.resize(keep);
        if (better(next.front(), best)) best = next.front();
        beam = std::move(next);
        beam_masks.clear();
        for (const Node& node : beam) beam_masks.push_back(mask_of(node.chain));
    }

    ExplanationRule rule;
    rule.target_label = 1;
    for (std::size_t p : best.chain) rule.conditions.push_back(preds[p].cond);
    rule.precision = static_cast<double>(best.hits) / static_cast<double>(best.matched);
    rule.coverage = static_cast<double>(best.matched) / static_cast<double>(n);

    // Every non-empty prefix of the emitted conjunction must be at most as precise as the next one.
    double previous = 0.0;
    for (std::size_t k = 1; k <= rule.conditions.size(); ++k) {
        const std::vector<Condition> prefix(rule.conditions.begin(), rule.conditions.begin() + static_cast<std::ptrdiff_t>(k));
        const double p = evaluate_rule(features, rows, target, prefix).precision;
        if (p + 1e-12 < previous) throw std::logic_error("induce_rule: precision decreased during growth");
        previous = p;
    }
    return rule;
}

std::vector<ExplanationRule> explain_split(const LabeledDataset& ds, const SplitRecommendation& rec,
                                           const RuleConfig& config) {
    if (rec.candidates.size() < 2) throw std::invalid_argument("explain_split: needs at least 2 candidates");
    std::vector<std::size_t> slice;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (ds.expert_labels[r] == rec.expert_label) slice.push_back(r);
    if (slice.empty()) throw std::invalid_argument("explain_split: expert cluster is empty");

    std::vector<ExplanationRule> rules;
    for (int c : rec.candidates) {
        std::vector<bool> target(slice.size());
        for (std::size_t i = 0; i < slice.size(); ++i) target[i] = ds.cluster_labels[slice[i]] == c;
        ExplanationRule rule = induce_rule(ds.features, ds.feature_names, slice, target, config);
        rule.target_label = c;
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::pair<ExplanationRule, ExplanationRule> explain_merge(const LabeledDataset& ds, const MergeRecommendation& rec,
                                                          const RuleConfig& config) {
    std::vector<std::size_t> slice;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (ds.expert_labels[r] == rec.first || ds.expert_labels[r] == rec.second) slice.push_back(r);

    auto one_vs_other = [&](int label) {
        std::vector<bool> target(slice.size());
        for (std::size_t i = 0; i < slice.size(); ++i) target[i] = ds.expert_labels[slice[i]] == label;
        ExplanationRule rule = induce_rule(ds.features, ds.feature_names, slice, target, config);
        rule.target_label = label;
        return rule;
    };
    return {one_vs_other(rec.first), one_vs_other(rec.second)};
}

BoundingBox bounding_box(const RealMatrix& features, std::span<const int> labels, int label, double q_lo,
                         double q_hi) {
    if (!(0.0 <= q_lo && q_lo <= q_hi && q_hi <= 1.0))
        throw std::invalid_argument("bounding_box: quantiles must satisfy 0 <= lo <= hi <= 1");
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < labels.size(); ++r)
        if (labels[r] == label) members.push_back(r);
    if (members.empty()) throw std::invalid_argument("bounding_box: label " + std::to_string(label) + " is empty");

    BoundingBox box{label, q_lo, q_hi, {}};
    std::vector<double> col(members.size());
    for (std::size_t f = 0; f < features.cols(); ++f) {
        for (std::size_t i = 0; i < members.size(); ++i) col[i] = features(members[i], f);
        std::sort(col.begin(), col.end());
        box.intervals.emplace_back(quantile_sorted(col, q_lo), quantile_sorted(col, q_hi));
    }
    return box;
}

BoundingBox bounding_box(const LabeledDataset& ds, int expert_label, double q_lo, double q_hi) {
    return bounding_box(ds.features, ds.expert_labels, expert_label, q_lo, q_hi);
}

const char* to_string(ConditionOp op) {
    switch (op) {
    case ConditionOp::le: return "<=";
    case ConditionOp::gt: return ">";
    case ConditionOp::eq: return "=";
    case ConditionOp::in_interval: return "in";
    }
    return "<=";
}

ConditionOp condition_op_from_string(const std::string& s) {
    if (s == "<=") return ConditionOp::le;
    if (s == ">") return ConditionOp::gt;
    if (s == "=") return ConditionOp::eq;
    if (s == "in") return ConditionOp::in_interval;
    throw std::invalid_argument("unknown condition operator: " + s);
}

std::string render(const Condition& c) {
    if (c.op == ConditionOp::in_interval)
        return c.feature + " in [" + format_fixed2(c.value) + ", " + format_fixed2(c.upper) + "]";
    return c.feature + " " + to_string(c.op) + " " + format_fixed2(c.value);
}

std::string render(const ExplanationRule& rule, const std::string& label_text) {
    std::string body;
    for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
        if (i) body += " AND ";
        body += render(rule.conditions[i]);
    }
    if (body.empty()) body = "TRUE";
    return label_text + ": " + body + " (Precision: " + format_fixed2(rule.precision) +
           ", Coverage: " + format_fixed2(rule.coverage) + ")";
}

void to_json(nlohmann::json& j, const Condition& c) {
    j = {{"feature", c.feature}, {"index", c.index}, {"op", to_string(c.op)}, {"value", c.value}};
    if (c.op == ConditionOp::in_interval) j["upper"] = c.upper;
}

void from_json(const nlohmann::json& j, Condition& c) {
    j.at("feature").get_to(c.feature);
    c.index = j.value("index", std::size_t{0});
    c.op = condition_op_from_string(j.at("op").get<std::string>());
    j.at("value").get_to(c.value);
    c.upper = j.value("upper", 0.0);
    if (c.op == ConditionOp::in_interval && c.upper < c.value)
        throw std::invalid_argument("condition interval has lower bound above upper bound");
}

void to_json(nlohmann::json& j, const ExplanationRule& r) {
    j = {{"target_label", r.target_label},
         {"conditions", r.conditions},
         {"precision", r.precision},
         {"coverage", r.coverage}};
}

void from_json(const nlohmann::json& j, ExplanationRule& r) {
    j.at("target_label").get_to(r.target_label);
    j.at("conditions").get_to(r.conditions);
    j.at("precision").get_to(r.precision);
    j.at("coverage").get_to(r.coverage);
}

void to_json(nlohmann::json& j, const BoundingBox& b) {
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& [lo, hi] : b.intervals) intervals.push_back({lo, hi});
    j = {{"label", b.label}, {"quantiles", {b.q_lo, b.q_hi}}, {"intervals", intervals}};
}

void to_json(nlohmann::json& j, const RuleConfig& c) {
    j = {{"max_conditions", c.max_conditions},
         {"precision_target", c.precision_target},
         {"quantile_grid", c.quantile_grid},
         {"beam_width", c.beam_width},
         {"categorical", c.categorical}};
}

void from_json(const nlohmann::json& j, RuleConfig& c) {
    RuleConfig d;
    c.max_conditions = j.value("max_conditions", d.max_conditions);
    c.precision_target = j.value("precision_target", d.precision_target);
    c.quantile_grid = j.value("quantile_grid", d.quantile_grid);
    c.beam_width = j.value("beam_width", d.beam_width);
    c.categorical = j.value("categorical", d.categorical);
}

nlohmann::json rule_with_masks(const ExplanationRule& rule, const RealMatrix& features, const std::string& label_text) {
    nlohmann::json j = rule;
    j["text"] = render(rule, label_text);
    nlohmann::json masks = nlohmann::json::array();
    for (const Condition& c : rule.conditions) {
        std::string bits(features.rows(), '0');
        for (std::size_t r = 0; r < features.rows(); ++r)
            if (c.holds(features.row(r))) bits[r] = '1';
        masks.push_back(std::move(bits));
    }
    j["condition_masks"] = std::move(masks);
    return j;
}

}  // namespace knac
