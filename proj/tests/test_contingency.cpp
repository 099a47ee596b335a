#include <doctest.h>

#include "knac/contingency.hpp"
#include "support.hpp"

using namespace knac;
using knac::testing::Gen;

namespace {

ContingencyMatrix from_counts(const CountMatrix& m) {
    auto [e, c] = knac::testing::rows_from_counts(m);
    return contingency(e, m.rows(), c, m.cols());
}

CountMatrix counts_of(std::initializer_list<std::initializer_list<long long>> rows) {
    CountMatrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (long long v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

void check_values(const RealMatrix& got, std::initializer_list<std::initializer_list<double>> want, double tol = 1e-12) {
    std::size_t r = 0;
    for (const auto& row : want) {
        std::size_t c = 0;
        for (double v : row) CHECK(got(r, c++) == doctest::Approx(v).epsilon(tol));
        ++r;
    }
}

}  // namespace

TEST_CASE("contingency examples") {
    std::vector<int> e{0, 0, 1, 1}, c{0, 1, 0, 1};
    CHECK(contingency(e, 2, c, 2).counts == counts_of({{1, 1}, {1, 1}}));
    e = {0, 0, 0, 1};
    c = {0, 0, 1, 1};
    CHECK(contingency(e, 2, c, 2).counts == counts_of({{2, 1}, {0, 1}}));
    e = {0, 1, 1, 2, 2, 2};
    CHECK(contingency(e, 3, e, 3).counts == counts_of({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}}));
    std::vector<int> unset{0, -1, 1, 1};
    CHECK_THROWS_AS(contingency(e, 3, unset, 2), std::invalid_argument);
}

TEST_CASE("contingency matches brute-force counting") {
    Gen g(101);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = g.size(1, 500), ne = g.size(1, std::min<std::size_t>(n, 8)), nc = g.size(1, std::min<std::size_t>(n, 8));
        const auto e = g.labels(n, ne);
        const auto c = g.labels(n, nc);
        const auto cm = contingency(e, ne, c, nc);
        const auto oracle = knac::testing::oracle_counts(e, c);
        long long total = 0;
        for (std::size_t i = 0; i < ne; ++i)
            for (std::size_t j = 0; j < nc; ++j) {
                const auto it = oracle.find({static_cast<int>(i), static_cast<int>(j)});
                CHECK(cm.counts(i, j) == (it == oracle.end() ? 0 : it->second));
                total += cm.counts(i, j);
            }
        CHECK(total == static_cast<long long>(n));
        CHECK(cm.total() == static_cast<long long>(n));
    }
}

TEST_CASE("entropy examples") {
    CHECK(entropy_bits(std::vector<double>{8, 0}) == 0.0);
    CHECK(entropy_bits(std::vector<double>{1, 1, 1, 1}) == 2.0);
    CHECK(entropy_bits(std::vector<double>{6, 8}) == doctest::Approx(0.9852).epsilon(1e-4));
    CHECK(entropy_bits(std::vector<double>{6, 8}) == doctest::Approx(knac::testing::oracle_entropy({6, 8})));
    CHECK_THROWS_AS(entropy_bits(std::vector<double>{0, 0}), std::invalid_argument);
}

TEST_CASE("column entropy is bounded by log2 of the expert count") {
    Gen g(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = g.size(1, 8);
        std::vector<double> v(k);
        for (auto& x : v) x = g.integer(0, 9);
        v[0] += 1;
        CHECK(entropy_bits(v) <= std::log2(static_cast<double>(k)) + 1e-12);
        std::vector<double> u(k, g.integer(1, 5));
        CHECK(entropy_bits(u) == doctest::Approx(std::log2(static_cast<double>(k))));
    }
}

TEST_CASE("split matrix examples") {
    check_values(split_matrix(from_counts(counts_of({{10, 10, 0}, {0, 0, 20}}))).values, {{1, 1, 0}, {0, 0, 1}});
    check_values(split_matrix(from_counts(counts_of({{8, 6}, {0, 8}}))).values, {{1, 0}, {0, 1}});
    check_values(split_matrix(from_counts(counts_of({{5, 0, 0}, {0, 7, 0}, {0, 0, 2}}))).values,
                 {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
}

TEST_CASE("split matrix intermediate values follow the three steps") {
    // Column 2 of [[8,6],[0,8]] before row scaling: (0.6, 0.8) / (H([6,8]) + 1).
    const double h = knac::testing::oracle_entropy({6, 8});
    CHECK(0.6 / (h + 1) == doctest::Approx(0.302).epsilon(1e-3));
    CHECK(0.8 / (h + 1) == doctest::Approx(0.403).epsilon(1e-3));
}

TEST_CASE("split matrix degenerate rows and a single expert label") {
    // Row 0 is flat and non-zero, row 1 is all zero.
    const auto sm = split_matrix(from_counts(counts_of({{4, 4}, {0, 0}})));
    check_values(sm.values, {{1, 1}, {0, 0}});
    const auto one = split_matrix(from_counts(counts_of({{3, 9, 0}})));
    check_values(one.values, {{1, 1, 0}});
    const auto row_mode = split_matrix(from_counts(counts_of({{10, 10, 0}, {0, 0, 20}})), AxisMode::row);
    CHECK(row_mode.axis_mode == AxisMode::row);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK((row_mode.values(r, c) >= 0.0 && row_mode.values(r, c) <= 1.0));
}

TEST_CASE("split matrix is bounded and scale invariant in both modes") {
    Gen g(23);
    for (int trial = 0; trial < 100; ++trial) {
        const CountMatrix m = g.counts(g.size(1, 6), g.size(1, 6));
        const long long s = g.integer(2, 9);
        CountMatrix scaled = m;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) scaled(r, c) = m(r, c) * s;
        for (AxisMode mode : {AxisMode::column, AxisMode::row}) {
            ContingencyMatrix a{m, {}, {}}, b{scaled, {}, {}};
            const auto ha = split_matrix(a, mode).values;
            const auto hb = split_matrix(b, mode).values;
            for (std::size_t r = 0; r < m.rows(); ++r) {
                double lo = INFINITY, hi = -INFINITY;
                for (std::size_t c = 0; c < m.cols(); ++c) {
                    CHECK(ha(r, c) >= 0.0);
                    CHECK(ha(r, c) <= 1.0);
                    CHECK(ha(r, c) == doctest::Approx(hb(r, c)).epsilon(1e-9));
                    lo = std::min(lo, ha(r, c));
                    hi = std::max(hi, ha(r, c));
                }
                CHECK((hi == 1.0 || hi == 0.0));
                if (hi != lo) CHECK(lo == 0.0);
            }
        }
    }
}

TEST_CASE("merge matrix examples") {
    const auto mm = merge_matrix(from_counts(counts_of({{3, 4}, {0, 0}})));
    check_values(mm.values, {{0.6, 0.8}, {0, 0}});
    CHECK(mm.sim(1, 1) == 0.0);
    CHECK(mm.sim(0, 1) == 0.0);

    const auto pair = merge_matrix(from_counts(counts_of({{10, 2}, {9, 3}})));
    CHECK(pair.sim(0, 1) == doctest::Approx(0.9923).epsilon(1e-4));
    CHECK(pair.sim(0, 1) == doctest::Approx(knac::testing::oracle_cosine({10, 2}, {9, 3})).epsilon(1e-12));

    const auto same = merge_matrix(from_counts(counts_of({{2, 5}, {4, 10}})));
    CHECK(same.sim(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("merge matrix invariants on random counts") {
    Gen g(31);
    for (int trial = 0; trial < 100; ++trial) {
        const CountMatrix m = g.counts(g.size(1, 7), g.size(1, 7));
        const auto mm = merge_matrix({m, {}, {}});
        CountMatrix scaled = m;
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) scaled(r, c) *= 3;
        const auto ms = merge_matrix({scaled, {}, {}});
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double norm = 0;
            bool zero = true;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                norm += mm.values(r, c) * mm.values(r, c);
                zero = zero && m(r, c) == 0;
                CHECK(mm.values(r, c) == doctest::Approx(ms.values(r, c)).epsilon(1e-12));
            }
            if (zero) {
                CHECK(norm == 0.0);
            } else {
                CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-9);
                CHECK(std::abs(mm.sim(r, r) - 1.0) <= 1e-9);
            }
            for (std::size_t q = 0; q < m.rows(); ++q) {
                CHECK(mm.sim(r, q) == mm.sim(q, r));
                CHECK(mm.sim(r, q) >= 0.0);
                CHECK(mm.sim(r, q) <= 1.0);
            }
        }
    }
}

TEST_CASE("matrices serialize with id maps") {
    std::vector<int> e{0, 1}, c{1, 0};
    const auto cm = contingency(e, 2, c, 2);
    const nlohmann::json j = cm;
    CHECK(j.at("counts") == nlohmann::json::parse("[[0,1],[1,0]]"));
    CHECK(j.contains("expert_ids"));
    CHECK(j.contains("cluster_ids"));
    const nlohmann::json s = split_matrix(cm);
    CHECK(s.at("axis_mode") == "column");
    CHECK(axis_mode_from_string("row") == AxisMode::row);
    CHECK_THROWS(axis_mode_from_string("diagonal"));
}
