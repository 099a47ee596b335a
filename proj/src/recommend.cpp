#include "knac/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string_view>

#include <nlohmann/json.hpp>

namespace knac {

namespace {

std::size_t distinct_count(const std::vector<int>& labels) {
    return std::set<int>(labels.begin(), labels.end()).size();
}

// Silhouette with the convention that a single-label dataset scores 0.
double silhouette_or_zero(const LabeledDataset& ds, const std::vector<int>& labels, const RecommendParams& p) {
    if (distinct_count(labels) < 2) return 0.0;
    return silhouette(ds.features, labels, p.silhouette_cap, p.seed);
}

std::string expert_name(const LabelNames& names, int id) { return "E_" + names.expert.at(id); }
std::string cluster_name(const LabelNames& names, int id) { return "C_" + names.cluster.at(id); }

}  // namespace

void RecommendParams::validate() const {
    auto finite = [](double v, const char* name) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite");
    };
    finite(epsilon_split, "epsilon_split");
    finite(epsilon_merge, "epsilon_merge");
    finite(lambda_split, "lambda_split");
    finite(lambda_merge, "lambda_merge");
    if (lambda_split < 0.0 || lambda_split >= 1.0)
        throw std::invalid_argument("lambda_split must lie in [0, 1)");
    if (lambda_merge < 0.0 || lambda_merge > 1.0)
        throw std::invalid_argument("lambda_merge must lie in [0, 1]");
    if (silhouette_cap < 2) throw std::invalid_argument("silhouette_cap must be at least 2");
}

std::vector<int> split_candidates(const SplitMatrix& h, std::size_t row, const RecommendParams& params) {
    if (row >= h.values.rows()) throw std::out_of_range("split_candidates: row out of range");
    std::vector<int> out;
    const auto values = h.values.row(row);
    for (std::size_t j = 0; j < values.size(); ++j)
        if (values[j] / (1.0 - params.lambda_split) > params.epsilon_split) out.push_back(static_cast<int>(j));
    return out;
}

std::vector<int> relabel_for_split(const LabeledDataset& ds, int row, const std::vector<int>& candidates) {
    const int base = static_cast<int>(ds.expert_count());
    const int residual = base + static_cast<int>(candidates.size());
    std::vector<int> labels = ds.expert_labels;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        if (labels[p] != row) continue;
        const auto it = std::find(candidates.begin(), candidates.end(), ds.cluster_labels[p]);
        labels[p] = it == candidates.end() ? residual : base + static_cast<int>(it - candidates.begin());
    }
    return labels;
}

double silhouette_decrease(const LabeledDataset& ds, int row, const std::vector<int>& candidates,
                           const RecommendParams& params) {
    const double before = silhouette_or_zero(ds, ds.expert_labels, params);
    const double after = silhouette_or_zero(ds, relabel_for_split(ds, row, candidates), params);
    return std::clamp((after - before + 2.0) / 4.0, 0.0, 1.0);
}

SplitRecommendation split_confidences(const LabeledDataset& ds, int row, const std::vector<int>& candidates,
                                      const SplitMatrix& h, const RecommendParams& params) {
    if (candidates.size() < 2) throw std::invalid_argument("split_confidences: needs at least 2 candidates");
    if (!ds.clustered()) throw std::invalid_argument("split_confidences: cluster labels are not set");
    SplitRecommendation rec;
    rec.expert_label = row;
    rec.candidates = candidates;
    const double lambda = params.lambda_split;
    if (lambda > 0.0) rec.s_dec = silhouette_decrease(ds, row, candidates, params);
    for (int j : candidates) {
        const double c = h.values(row, j);
        rec.per_candidate_confidence.push_back(rec.s_dec ? (1.0 - lambda) * c + lambda * *rec.s_dec : c);
    }
    rec.confidence = std::accumulate(rec.per_candidate_confidence.begin(), rec.per_candidate_confidence.end(), 0.0) /
                     static_cast<double>(rec.per_candidate_confidence.size());
    return rec;
}

std::vector<SplitRecommendation> recommend_splits(const LabeledDataset& ds, const SplitMatrix& h,
                                                  const RecommendParams& params) {
    std::vector<SplitRecommendation> out;
    for (std::size_t i = 0; i < h.values.rows(); ++i) {
        const auto cands = split_candidates(h, i, params);
        if (cands.size() < 2) continue;
        out.push_back(split_confidences(ds, static_cast<int>(i), cands, h, params));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.expert_label < b.expert_label;
    });
    return out;
}

std::vector<MergeRecommendation> merge_candidates(const LabeledDataset& ds, const ContingencyMatrix& m,
                                                  const MergeMatrix& mm, const RecommendParams& params) {
    const std::size_t ne = m.experts();
    std::vector<MergeRecommendation> out;
    if (ne < 2) return out;

    const double lambda = params.lambda_merge;
    RealMatrix linkage;
    if (lambda > 0.0) linkage = linkage_matrix_normalized(ds.features, ds.expert_labels, params.linkage);

    for (std::size_t j = 0; j < ne; ++j) {
        for (std::size_t k = j + 1; k < ne; ++k) {
            MergeRecommendation rec;
            rec.first = static_cast<int>(j);
            rec.second = static_cast<int>(k);
            rec.sim_term = mm.sim(j, k);
            if (lambda > 0.0) rec.linkage_term = 1.0 - linkage(j, k);
            rec.confidence = (1.0 - lambda) * rec.sim_term + (rec.linkage_term ? lambda * *rec.linkage_term : 0.0);
            if (!(rec.confidence > params.epsilon_merge)) continue;
            long long best = -1;
            for (std::size_t c = 0; c < m.clusters(); ++c) {
                const long long joint = m.counts(j, c) + m.counts(k, c);
                if (joint > best) {
                    best = joint;
                    rec.target_cluster = static_cast<int>(c);
                }
            }
            out.push_back(rec);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.first != b.first) return a.first < b.first;
        if (a.second != b.second) return a.second < b.second;
        return a.target_cluster < b.target_cluster;
    });
    return out;
}

std::string format_fixed2(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    if (std::string_view(buf) == "-0.00") return "0.00";
    return buf;
}

std::string render(const SplitRecommendation& rec, const LabelNames& names) {
    std::string clusters;
    for (std::size_t i = 0; i < rec.candidates.size(); ++i) {
        if (i) clusters += ", ";
        clusters += cluster_name(names, rec.candidates[i]);
    }
    return "SPLIT \n"
           "    EXPERT CLUSTER  " + expert_name(names, rec.expert_label) + " \n"
           "INTO \n"
           "    CLUSTERS  [(" + clusters + ")]  (Confidence " + format_fixed2(rec.confidence) + ")";
}

std::string render(const MergeRecommendation& rec, const LabelNames& names) {
    return "MERGE \n"
           "    EXPERT CLUSTER " + expert_name(names, rec.first) + " \n"
           "WITH \n"
           "    EXPERT CLUSTER " + expert_name(names, rec.second) + " \n"
           "INTO \n"
           "    CLUSTER " + cluster_name(names, rec.target_cluster) + " # (Confidence " +
           format_fixed2(rec.confidence) + ")";
}

nlohmann::json to_json(const SplitRecommendation& rec, const LabelNames& names) {
    std::vector<std::string> cluster_ids;
    for (int c : rec.candidates) cluster_ids.push_back(names.cluster.at(c));
    nlohmann::json terms = {{"per_candidate", rec.per_candidate_confidence}, {"s_dec", nullptr}};
    if (rec.s_dec) terms["s_dec"] = *rec.s_dec;
    return {{"type", "split"},
            {"expert_label", rec.expert_label},
            {"candidates", rec.candidates},
            {"ids", {{"expert", {names.expert.at(rec.expert_label)}}, {"clusters", cluster_ids}}},
            {"confidence", rec.confidence},
            {"terms", terms},
            {"render_text", render(rec, names)}};
}

nlohmann::json to_json(const MergeRecommendation& rec, const LabelNames& names) {
    nlohmann::json terms = {{"sim", rec.sim_term}, {"linkage", nullptr}};
    if (rec.linkage_term) terms["linkage"] = *rec.linkage_term;
    return {{"type", "merge"},
            {"pair", {rec.first, rec.second}},
            {"target_cluster", rec.target_cluster},
            {"ids",
             {{"expert", {names.expert.at(rec.first), names.expert.at(rec.second)}},
              {"clusters", {names.cluster.at(rec.target_cluster)}}}},
            {"confidence", rec.confidence},
            {"terms", terms},
            {"render_text", render(rec, names)}};
}

SplitRecommendation split_from_json(const nlohmann::json& j) {
    SplitRecommendation rec;
    j.at("expert_label").get_to(rec.expert_label);
    j.at("candidates").get_to(rec.candidates);
    j.at("confidence").get_to(rec.confidence);
    const auto& terms = j.at("terms");
    terms.at("per_candidate").get_to(rec.per_candidate_confidence);
    if (!terms.at("s_dec").is_null()) rec.s_dec = terms.at("s_dec").get<double>();
    return rec;
}

MergeRecommendation merge_from_json(const nlohmann::json& j) {
    MergeRecommendation rec;
    const auto& pair = j.at("pair");
    rec.first = pair.at(0).get<int>();
    rec.second = pair.at(1).get<int>();
    j.at("target_cluster").get_to(rec.target_cluster);
    j.at("confidence").get_to(rec.confidence);
    const auto& terms = j.at("terms");
    terms.at("sim").get_to(rec.sim_term);
    if (!terms.at("linkage").is_null()) rec.linkage_term = terms.at("linkage").get<double>();
    return rec;
}

void to_json(nlohmann::json& j, const RecommendParams& p) {
    j = {{"epsilon_split", p.epsilon_split},
         {"lambda_split", p.lambda_split},
         {"epsilon_merge", p.epsilon_merge},
         {"lambda_merge", p.lambda_merge},
         {"linkage", to_string(p.linkage)},
         {"silhouette_cap", p.silhouette_cap},
         {"seed", p.seed},
         {"axis_mode", to_string(p.axis_mode)}};
}

void from_json(const nlohmann::json& j, RecommendParams& p) {
    RecommendParams d;
    p.epsilon_split = j.value("epsilon_split", d.epsilon_split);
    p.lambda_split = j.value("lambda_split", d.lambda_split);
    p.epsilon_merge = j.value("epsilon_merge", d.epsilon_merge);
    p.lambda_merge = j.value("lambda_merge", d.lambda_merge);
    p.linkage = linkage_from_string(j.value("linkage", std::string(to_string(d.linkage))));
    p.silhouette_cap = j.value("silhouette_cap", d.silhouette_cap);
    p.seed = j.value("seed", d.seed);
    p.axis_mode = axis_mode_from_string(j.value("axis_mode", std::string(to_string(d.axis_mode))));
}

}  // namespace knac
