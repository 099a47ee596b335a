#include <doctest.h>

#include "knac/contingency.hpp"
#include "knac/recommend.hpp"
#include "knac/scenarios.hpp"
#include "support.hpp"

using namespace knac;
using knac::testing::Gen;

namespace {

SplitMatrix one_row(std::initializer_list<double> values) {
    SplitMatrix h;
    h.values = RealMatrix(1, values.size());
    std::size_t c = 0;
    for (double v : values) h.values(0, c++) = v;
    return h;
}

RecommendParams params_with(double eps_s, double lam_s, double eps_m = 0.8, double lam_m = 0.2) {
    RecommendParams p;
    p.epsilon_split = eps_s;
    p.lambda_split = lam_s;
    p.epsilon_merge = eps_m;
    p.lambda_merge = lam_m;
    return p;
}

/// Dataset whose contingency matrix is `counts` (empty rows and columns get
/// one point so every label is used); features are random.
LabeledDataset dataset_from_counts(CountMatrix counts, Gen& g) {
    for (std::size_t r = 0; r < counts.rows(); ++r) {
        long long sum = 0;
        for (std::size_t c = 0; c < counts.cols(); ++c) sum += counts(r, c);
        if (sum == 0) counts(r, r % counts.cols()) = 1;
    }
    for (std::size_t c = 0; c < counts.cols(); ++c) {
        long long sum = 0;
        for (std::size_t r = 0; r < counts.rows(); ++r) sum += counts(r, c);
        if (sum == 0) counts(c % counts.rows(), c) = 1;
    }
    auto [e, c] = knac::testing::rows_from_counts(counts);
    return knac::testing::labeled(g.matrix(e.size(), 2), e, c);
}

std::vector<MergeRecommendation> merges_for(const LabeledDataset& ds, const RecommendParams& p) {
    const auto cm = contingency(ds);
    return merge_candidates(ds, cm, merge_matrix(cm), p);
}

std::vector<SplitRecommendation> splits_for(const LabeledDataset& ds, const RecommendParams& p) {
    return recommend_splits(ds, split_matrix(contingency(ds), p.axis_mode), p);
}

}  // namespace

TEST_CASE("split candidate threshold examples") {
    CHECK(split_candidates(one_row({1, 1, 0}), 0, params_with(0.8, 0)) == std::vector<int>{0, 1});
    CHECK(split_candidates(one_row({1, 0.5, 0}), 0, params_with(0.8, 0)) == std::vector<int>{0});
    CHECK(split_candidates(one_row({1, 0.5, 0}), 0, params_with(0.8, 0.5)) == std::vector<int>{0, 1});
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(params_with(0.8, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(params_with(0.8, -0.1).validate(), std::invalid_argument);
    CHECK_THROWS_AS(params_with(0.8, 0.1, 0.8, 1.5).validate(), std::invalid_argument);
    CHECK_NOTHROW(params_with(0.8, 0.1, 0.8, 1.0).validate());
}

TEST_CASE("lambda_split zero skips silhouette") {
    Gen g(1);
    CountMatrix m(2, 2);
    m(0, 0) = 10;
    m(0, 1) = 10;
    m(1, 1) = 1;
    const auto ds = dataset_from_counts(m, g);
    SplitMatrix h = one_row({1, 1});
    const auto before = silhouette_evaluations();
    const auto rec = split_confidences(ds, 0, {0, 1}, h, params_with(0.8, 0));
    CHECK(silhouette_evaluations() == before);
    CHECK_FALSE(rec.s_dec.has_value());
    CHECK(rec.per_candidate_confidence == std::vector<double>{1, 1});
    CHECK(rec.confidence == 1.0);
}

TEST_CASE("two separated sub-blobs raise the split confidence") {
    BlobSpec spec;
    spec.n_blobs = 2;
    spec.points_per_blob = 60;
    spec.centers = {{0, 0}, {10, 0}};
    spec.seed = 3;
    auto blobs = generate_blobs(spec);
    const std::vector<int> clusters = blobs.expert_labels;
    auto ds = with_cluster_labels(with_expert_labels(blobs, std::vector<int>(blobs.size(), 0), {"0"}), clusters);
    const auto params = params_with(0.8, 0.5);
    const auto h = split_matrix(contingency(ds));
    const auto rec = split_confidences(ds, 0, {0, 1}, h, params);
    REQUIRE(rec.s_dec.has_value());
    CHECK(*rec.s_dec > 0.5);
    const double s_after = knac::testing::oracle_silhouette(ds.features, relabel_for_split(ds, 0, {0, 1}));
    CHECK(*rec.s_dec == doctest::Approx((s_after - 0.0 + 2) / 4).epsilon(1e-9));
    CHECK(rec.confidence > 0.5 * h.values(0, 0));
    double mean = 0;
    for (double c : rec.per_candidate_confidence) mean += c;
    CHECK(rec.confidence == doctest::Approx(mean / 2).epsilon(1e-12));
}

TEST_CASE("merge example with hand cosine") {
    Gen g(2);
    CountMatrix m(2, 2);
    m(0, 0) = 10;
    m(0, 1) = 2;
    m(1, 0) = 9;
    m(1, 1) = 3;
    const auto ds = dataset_from_counts(m, g);
    const auto recs = merges_for(ds, params_with(0.8, 0.1, 0.95, 0.0));
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].first == 0);
    CHECK(recs[0].second == 1);
    CHECK(recs[0].target_cluster == 0);
    CHECK(recs[0].confidence == doctest::Approx(0.9923).epsilon(1e-4));
    CHECK_FALSE(recs[0].linkage_term.has_value());

    CHECK(merges_for(ds, params_with(0.8, 0.1, 1.01, 0.0)).empty());
}

TEST_CASE("duplicated expert clusters merge with confidence one") {
    Gen g(4);
    CountMatrix m(2, 2);
    m(0, 0) = 5;
    m(0, 1) = 7;
    m(1, 0) = 5;
    m(1, 1) = 7;
    const auto recs = merges_for(dataset_from_counts(m, g), params_with(0.8, 0.1, 0.5, 0.0));
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].confidence == doctest::Approx(1.0));
    CHECK(recs[0].target_cluster == 1);
}

TEST_CASE("merge confidence decomposes into its two terms") {
    Gen g(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ds = dataset_from_counts(g.counts(g.size(2, 5), g.size(1, 4), 10, 0.2), g);
        if (ds.expert_count() < 2 || ds.size() < 2) continue;
        const auto p = params_with(0.8, 0.1, -1.0, g.real(0.0, 1.0));
        const auto recs = merges_for(ds, p);
        CHECK(recs.size() == ds.expert_count() * (ds.expert_count() - 1) / 2);
        for (const auto& r : recs) {
            CHECK(r.first < r.second);
            REQUIRE(r.linkage_term.has_value());
            CHECK(r.confidence ==
                  doctest::Approx((1 - p.lambda_merge) * r.sim_term + p.lambda_merge * *r.linkage_term).epsilon(1e-12));
        }
        for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].confidence >= recs[i].confidence);
    }
}

TEST_CASE("raising thresholds never adds recommendations") {
    Gen g(12);
    for (int trial = 0; trial < 25; ++trial) {
        const auto ds = dataset_from_counts(g.counts(g.size(2, 5), g.size(2, 5), 12, 0.4), g);
        if (ds.expert_count() < 2 || ds.cluster_count() < 1) continue;
        const double lo = g.real(0.2, 0.9), hi = lo + g.real(0.0, 0.3);
        const auto split_lo = splits_for(ds, params_with(lo, 0.0, lo, 0.0));
        const auto split_hi = splits_for(ds, params_with(hi, 0.0, hi, 0.0));
        CHECK(split_hi.size() <= split_lo.size());
        for (const auto& s : split_hi) {
            CHECK(s.candidates.size() >= 2);
            const auto it = std::find_if(split_lo.begin(), split_lo.end(),
                                         [&](const auto& x) { return x.expert_label == s.expert_label; });
            REQUIRE(it != split_lo.end());
            CHECK(std::includes(it->candidates.begin(), it->candidates.end(), s.candidates.begin(), s.candidates.end()));
        }
        const auto merge_lo = merges_for(ds, params_with(lo, 0.0, lo, 0.0));
        const auto merge_hi = merges_for(ds, params_with(hi, 0.0, hi, 0.0));
        CHECK(merge_hi.size() <= merge_lo.size());
        for (const auto& m : merge_hi) CHECK(m.confidence > hi);
    }
}

TEST_CASE("seeded blob scenarios yield exactly one recommendation each") {
    const RecommendParams defaults;
    const auto split = split_scenario(7);
    const auto splits = splits_for(split.dataset, defaults);
    REQUIRE(splits.size() == 1);
    CHECK(splits[0].candidates.size() == 2);
    CHECK(splits[0].confidence >= 0.8);
    CHECK(merges_for(split.dataset, defaults).empty());

    const auto merge = merge_scenario(7);
    CHECK(splits_for(merge.dataset, defaults).empty());
    const auto merges = merges_for(merge.dataset, defaults);
    REQUIRE(merges.size() == 1);
    CHECK(merges[0].confidence >= 0.95);
}

TEST_CASE("render formats") {
    SplitRecommendation s;
    s.expert_label = 1;
    s.candidates = {1, 2};
    s.confidence = 0.87;
    const LabelNames names{{"0", "1", "2", "3"}, {"0", "1", "2"}};
    CHECK(render(s, names) == "SPLIT \n    EXPERT CLUSTER  E_1 \nINTO \n    CLUSTERS  [(C_1, C_2)]  (Confidence 0.87)");
    MergeRecommendation m;
    m.first = 0;
    m.second = 3;
    m.target_cluster = 0;
    m.confidence = 0.98;
    CHECK(render(m, names) ==
          "MERGE \n    EXPERT CLUSTER E_0 \nWITH \n    EXPERT CLUSTER E_3 \nINTO \n    CLUSTER C_0 # (Confidence 0.98)");
    m.confidence = 1.0;
    CHECK(render(m, names).find("(Confidence 1.00)") != std::string::npos);
    CHECK(format_fixed2(0.005) == "0.01");
    CHECK(format_fixed2(-0.0) == "0.00");
}

TEST_CASE("recommendations round-trip through JSON") {
    SplitRecommendation s{2, {0, 3}, {0.9, 0.8}, 0.85, 0.6};
    const LabelNames names{{"a", "b", "c"}, {"0", "1", "2", "3"}};
    const auto j = to_json(s, names);
    CHECK(j.at("type") == "split");
    CHECK(j.at("render_text") == render(s, names));
    const auto back = split_from_json(j);
    CHECK(back.expert_label == 2);
    CHECK(back.candidates == s.candidates);
    CHECK(back.per_candidate_confidence == s.per_candidate_confidence);
    CHECK(back.s_dec == s.s_dec);

    MergeRecommendation m{0, 2, 1, 0.97, 0.99, 0.89};
    const auto mj = to_json(m, names);
    const auto mb = merge_from_json(mj);
    CHECK(mb.first == 0);
    CHECK(mb.second == 2);
    CHECK(mb.target_cluster == 1);
    CHECK(mb.confidence == m.confidence);
    CHECK(mb.linkage_term == m.linkage_term);
}
