#include "contrastscore/error.hpp"
#include "contrastscore/stats.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>

using namespace contrastscore;
using namespace contrastscore::stats;
using namespace oracle;

TEST_CASE("pearson and spearman agree with brute force on 200 random instances") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    int defined = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = size(rng);
        const auto x = draw(rng, n, trial % 3 == 0);
        auto y = draw(rng, n, trial % 4 == 0);
        for (std::size_t i = 0; i < n; ++i) y[i] += 0.5 * x[i];
        const auto want_p = oracle_pearson(x, y);
        if (want_p) {
            CHECK(std::fabs(pearson(x, y) - static_cast<double>(*want_p)) <= 1e-10);
            ++defined;
        } else {
            CHECK_THROWS_AS(pearson(x, y), Error);
        }
        const auto want_s = oracle_spearman(x, y);
        if (want_s) CHECK(std::fabs(spearman(x, y) - static_cast<double>(*want_s)) <= 1e-10);
        else CHECK_THROWS_AS(spearman(x, y), Error);
        CHECK(average_ranks(x) == oracle_ranks(x));
    }
    CHECK(defined > 150);
}

TEST_CASE("pearson rejects bad input") {
    const std::vector<double> one{1.0}, two{1.0, 2.0}, flat{3.0, 3.0};
    CHECK_THROWS_AS(pearson(one, one), Error);
    CHECK_THROWS_AS(pearson(two, one), Error);
    try {
        pearson(two, flat);
        FAIL("expected DegenerateVariance");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::DegenerateVariance);
    }
}

TEST_CASE("pearson is exact on a perfect line and stable under offsets") {
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(1e9 + i);
        y.push_back(-3.0 * i + 7.0);
    }
    CHECK(pearson(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pairwise accuracy matches O(n^2) enumeration, ties included") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(2, 50);
    std::uniform_int_distribution<int> seg(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = size(rng);
        const auto metric = draw(rng, n, trial % 2 == 0);
        const auto human = draw(rng, n, trial % 3 != 0);
        std::vector<PairItem> items;
        for (std::size_t i = 0; i < n; ++i)
            items.push_back({"s" + std::to_string(seg(rng)), "m" + std::to_string(i), metric[i], human[i]});
        for (auto grouping : {Grouping::within_segment, Grouping::global}) {
            for (auto policy : {TiePolicy::exclude_human_ties, TiePolicy::tie_calibrated}) {
                const auto want = oracle_pairwise(items, grouping, policy);
                INFO("trial " << trial << " " << to_string(grouping) << " " << to_string(policy));
                if (!want.accuracy) {
                    CHECK_THROWS_AS(pairwise_accuracy(items, grouping, policy), Error);
                    continue;
                }
                const auto got = pairwise_accuracy(items, grouping, policy);
                CHECK(std::fabs(got.accuracy - *want.accuracy) <= 1e-10);
                CHECK(got.pairs_total == want.total);
                if (policy == TiePolicy::tie_calibrated) CHECK(got.tie_epsilon == want.eps);
            }
        }
    }
}

TEST_CASE("pairwise accuracy on a hand-worked example") {
    // one segment, three systems: human a > b = c; metric a > c > b with c barely above b
    const std::vector<PairItem> items{{"1", "a", 0.9, 3}, {"1", "b", 0.1, 1}, {"1", "c", 0.15, 1}};
    const auto plain = pairwise_accuracy(items, Grouping::within_segment, TiePolicy::exclude_human_ties);
    CHECK(plain.pairs_total == 2);
    CHECK(plain.pairs_tied_human == 1);
    CHECK(plain.accuracy == 1.0);
    const auto cal = pairwise_accuracy(items, Grouping::within_segment, TiePolicy::tie_calibrated);
    CHECK(cal.pairs_total == 3);
    CHECK(cal.tie_epsilon == doctest::Approx(0.05)); // ties b/c, keeps a ahead of both
    CHECK(cal.accuracy == 1.0);
}

TEST_CASE("metric ties on human-untied pairs count as wrong") {
    const std::vector<PairItem> items{{"1", "a", 0.5, 2}, {"1", "b", 0.5, 1}};
    const auto r = pairwise_accuracy(items, Grouping::within_segment, TiePolicy::exclude_human_ties);
    CHECK(r.accuracy == 0.0);
    CHECK(r.pairs_tied_metric == 1);
}

TEST_CASE("bias score equals spearman of LS against z-score unfairness") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> size(3, 50);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = size(rng);
        const auto ls = draw(rng, n, false);
        const auto metric = draw(rng, n, trial % 5 == 0);
        const auto human = draw(rng, n, trial % 2 == 0);
        const auto zm = oracle_z(metric), zh = oracle_z(human);
        for (auto mode : {UnfairnessMode::signed_difference, UnfairnessMode::absolute_difference}) {
            std::vector<double> us;
            for (std::size_t i = 0; i < n; ++i) {
                const long double d = zm[i] - zh[i];
                const long double u = mode == UnfairnessMode::absolute_difference ? std::fabs(d) : d;
                us.push_back(static_cast<double>(std::round(u * 1e12L) / 1e12L));
            }
            const auto [lo, hi] = std::minmax_element(us.begin(), us.end());
            const auto got = bias_score(ls, metric, human, mode);
            CHECK(got.n == static_cast<long>(n));
            if (*hi - *lo <= 1e-9) {
                CHECK(got.degenerate);
                CHECK(got.bias == 0.0);
                continue;
            }
            const auto want = oracle_spearman(ls, us);
            REQUIRE(want);
            CHECK(std::fabs(got.bias - static_cast<double>(*want)) <= 1e-10);
            ++checked;
        }
    }
    CHECK(checked > 300);
}

TEST_CASE("bias score flags identical metric and human scores as degenerate") {
    const std::vector<double> ls{1, 2, 3, 4}, s{0.1, 0.5, 0.2, 0.9};
    const auto r = bias_score(ls, s, s);
    CHECK(r.degenerate);
    CHECK(r.bias == 0.0);
    const std::vector<double> flat{1, 1, 1, 1};
    CHECK_THROWS_AS(bias_score(flat, s, s), Error);
}

TEST_CASE("zscore uses the population standard deviation") {
    const std::vector<double> x{1, 2, 3, 4};
    const auto z = zscore(x);
    const double sd = std::sqrt(1.25);
    CHECK(z[0] == doctest::Approx(-1.5 / sd));
    CHECK(z[3] == doctest::Approx(1.5 / sd));
}

TEST_CASE("grouping and tie policy names round-trip") {
    for (auto g : {Grouping::within_segment, Grouping::global}) CHECK(parse_grouping(to_string(g)) == g);
    for (auto p : {TiePolicy::exclude_human_ties, TiePolicy::tie_calibrated}) CHECK(parse_tie_policy(to_string(p)) == p);
    CHECK_THROWS_AS(parse_tie_policy("sometimes"), Error);
}
