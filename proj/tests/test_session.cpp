#include <doctest.h>

#include "knac/scenarios.hpp"
#include "knac/session.hpp"
#include "support.hpp"

using namespace knac;

namespace {

Session scenario_session(const std::string& name, std::uint64_t seed = 7, SessionConfig config = {}) {
    const auto sc = make_scenario(name, seed);
    StartOptions options;
    options.reference_labels = sc.truth;
    return start("t", sc.dataset, config, options);
}

std::vector<Decision> all(const Session& s, Verdict v) {
    std::vector<Decision> out;
    for (const auto& p : s.pending) out.push_back({p.id, v, "", "expert", ""});
    return out;
}

}  // namespace

TEST_CASE("a fresh session on the corrupted scenario has work to do") {
    const auto s = scenario_session("corrupted");
    CHECK_FALSE(s.pending.empty());
    CHECK(s.iteration == 0);
    CHECK(s.token() == "it-0");
    CHECK(s.metrics_history.size() == 1);
    REQUIRE(s.metrics_history[0].vs_reference.has_value());
    for (const auto& p : s.pending) {
        CHECK_FALSE(p.rules.empty());
        CHECK(p.id.rfind("i0-", 0) == 0);
    }
}

TEST_CASE("an unreachable threshold converges immediately") {
    SessionConfig config;
    config.params.lambda_split = 0.0;  // otherwise the split threshold is divided by 1 - lambda
    config.params.epsilon_split = 1.01;
    config.params.epsilon_merge = 1.01;
    auto s = scenario_session("corrupted", 7, config);
    CHECK(s.pending.empty());
    s = iterate(s, {});
    CHECK(s.converged);
    CHECK(s.status == SessionStatus::converged);
    CHECK_THROWS_AS(iterate(s, {}), SessionError);
}

TEST_CASE("rejecting everything leaves the rule base unchanged") {
    const auto s0 = scenario_session("corrupted");
    const auto s1 = iterate(s0, all(s0, Verdict::reject));
    CHECK(s1.converged);
    CHECK(dump_knowledge_base(s1.kb) == dump_knowledge_base(s0.kb));
    CHECK(s1.dataset.expert_labels == s0.dataset.expert_labels);
    CHECK(s1.decision_log.size() == s0.pending.size());
}

TEST_CASE("accepting the split scenario's split removes it") {
    const auto s0 = scenario_session("split");
    REQUIRE(s0.pending.size() == 1);
    REQUIRE(s0.pending[0].is_split());
    const auto s1 = iterate(s0, all(s0, Verdict::accept));
    CHECK_FALSE(s1.converged);
    CHECK(s1.kb.version == s0.kb.version + 1);
    CHECK(s1.dataset.expert_count() == s0.dataset.expert_count() + 1);
    CHECK(std::none_of(s1.pending.begin(), s1.pending.end(), [](const auto& p) { return p.is_split(); }));
    CHECK(s1.metrics_history.back().vs_clusters.v_measure > s0.metrics_history.back().vs_clusters.v_measure);
}

TEST_CASE("accepting the merge scenario's merge") {
    const auto s0 = scenario_session("merge");
    REQUIRE(s0.pending.size() == 1);
    CHECK_FALSE(s0.pending[0].is_split());
    const auto s1 = iterate(s0, all(s0, Verdict::accept));
    CHECK(s1.dataset.expert_count() == s0.dataset.expert_count() - 1);
    CHECK(s1.metrics_history.back().vs_reference->v_measure >= s0.metrics_history.back().vs_reference->v_measure);
}

TEST_CASE("decisions are validated") {
    const auto s = scenario_session("corrupted");
    CHECK_THROWS_AS(iterate(s, {{"i9-s0", Verdict::accept, "", "", ""}}), SessionError);
    const auto id = s.pending.front().id;
    try {
        iterate(s, {{id, Verdict::accept, "", "", ""}, {id, Verdict::reject, "", "", ""}});
        FAIL("expected duplicate_decision");
    } catch (const SessionError& e) {
        CHECK(e.code == "duplicate_decision");
    }
    try {
        record_decisions(s, {}, "it-3");
        FAIL("expected stale_token");
    } catch (const SessionError& e) {
        CHECK(e.code == "stale_token");
    }
    auto d = record_decisions(s, {{id, Verdict::accept, "", "", ""}}, s.token());
    d = record_decisions(d, {{id, Verdict::reject, "", "", ""}}, s.token());
    REQUIRE(d.draft.size() == 1);
    CHECK(d.draft[0].verdict == Verdict::reject);
    CHECK(d.kb.version == s.kb.version);

    const auto next = iterate(s, all(s, Verdict::accept));
    REQUIRE(next.find_pending(id) == nullptr);
    try {
        iterate(next, {{id, Verdict::accept, "", "", ""}});
        FAIL("expected stale_recommendation");
    } catch (const SessionError& e) {
        CHECK(e.code == "stale_recommendation");
    }
}

TEST_CASE("automated expert on the corrupted scenario") {
    for (std::uint64_t seed : {7u, 11u}) {
        const auto s0 = scenario_session("corrupted", seed);
        const auto s = auto_expert(s0, 0.8);
        CHECK(s.converged);
        CHECK(s.iteration <= 20);
        double previous = -1;
        for (const auto& r : s.metrics_history) {
            CHECK(r.vs_reference->v_measure >= previous - 1e-12);
            previous = r.vs_reference->v_measure;
        }
        CHECK(s.metrics_history.back().vs_reference->v_measure >
              s.metrics_history.front().vs_reference->v_measure);
    }
}

TEST_CASE("automated expert thresholds") {
    const auto s0 = scenario_session("corrupted");
    const auto none = auto_expert(s0, 1.01);
    CHECK(none.converged);
    CHECK(none.iteration == 1);
    CHECK(dump_knowledge_base(none.kb) == dump_knowledge_base(s0.kb));

    SessionConfig capped;
    capped.max_iterations = 2;
    const auto c0 = scenario_session("corrupted", 7, capped);
    const auto c = auto_expert(c0, 0.0);
    CHECK(c.iteration <= 2);
    if (!c.converged) CHECK(c.status == SessionStatus::iteration_cap);
    CHECK_THROWS_AS(auto_expert(s0, 1.5), SessionError);
}

TEST_CASE("an empty iterate leaves the rule base as it was") {
    const auto s0 = scenario_session("split");
    const auto s1 = iterate(s0, {});
    CHECK(s1.converged);
    CHECK(dump_knowledge_base(s1.kb) == dump_knowledge_base(s0.kb));
    CHECK(s1.dataset.expert_labels == s0.dataset.expert_labels);
}

TEST_CASE("replaying the decision log reproduces the session") {
    const auto s = auto_expert(scenario_session("corrupted"), 0.8);
    const auto r = replay(s);
    CHECK(session_state_json(r).dump() == session_state_json(s).dump());
    CHECK(session_view(r).dump() == session_view(s).dump());
}

TEST_CASE("session state round-trips through JSON") {
    auto s = scenario_session("corrupted");
    s = record_decisions(s, {{s.pending.front().id, Verdict::accept, "n", "alice", "t"}}, s.token());
    s = iterate(s, all(s, Verdict::accept));
    const auto j = session_state_json(s);
    const auto back = session_from_state(j, s.dataset, s.reference_labels);
    CHECK(session_state_json(back).dump() == j.dump());
    CHECK(session_view(back).dump() == session_view(s).dump());
}

TEST_CASE("views carry the recommendation list and explanations") {
    const auto s = scenario_session("split");
    const auto v = session_view(s);
    CHECK(v.at("token") == "it-0");
    REQUIRE(v.at("recommendations").size() == 1);
    const auto& rec = v.at("recommendations")[0];
    CHECK(rec.at("type") == "split");
    CHECK(rec.at("explanation").size() == 2);
    const auto e = explanation_json(s, s.pending[0]);
    CHECK(e.at("bounding_boxes").size() == 2);
    CHECK(e.at("rules")[0].at("condition_masks").size() == s.pending[0].rules[0].conditions.size());
}
