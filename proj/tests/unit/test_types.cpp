#include "support.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/types.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace contrastscore;

namespace {

TokenProbSequence seq(Role role, std::vector<std::pair<std::int64_t, double>> toks, std::string tokenizer = "t") {
    TokenProbSequence s;
    s.model_id = role == Role::expert ? "big" : "small";
    s.role = role;
    s.tokenizer_id = std::move(tokenizer);
    for (auto [id, p] : toks) s.tokens.push_back({id, "t" + std::to_string(id), p, {}});
    return s;
}

ErrorKind kind_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Config;
}

} // namespace

TEST_CASE("natural order compares digit runs numerically") {
    CHECK(natural_less("seg2", "seg10"));
    CHECK_FALSE(natural_less("seg10", "seg2"));
    CHECK(natural_less("9", "10"));
    CHECK(natural_less("M5", "M11"));
    CHECK(natural_less("a", "b"));
    CHECK_FALSE(natural_less("x", "x"));
    const InstanceKey a{"d", "2", "M0"}, b{"d", "10", "M0"};
    CHECK(a < b);
}

TEST_CASE("instance keys round-trip through text") {
    const InstanceKey k{"mqm22-en-de", "17", "Online-A"};
    CHECK(parse_instance_key(k.str()) == k);
    CHECK(kind_of([] { parse_instance_key("only/two"); }) == ErrorKind::Config);
}

TEST_CASE("sequence validation") {
    CHECK_NOTHROW(validate(seq(Role::expert, {{1, 0.0}, {2, 1.0}})));
    CHECK(kind_of([] { validate(seq(Role::expert, {})); }) == ErrorKind::InvalidValue);
    CHECK(kind_of([] { validate(seq(Role::expert, {{1, 1.5}})); }) == ErrorKind::InvalidValue);
    CHECK(kind_of([] { validate(seq(Role::expert, {{1, std::nan("")}})); }) == ErrorKind::InvalidValue);
    CHECK(kind_of([] { validate(seq(Role::expert, {{-1, 0.5}})); }) == ErrorKind::InvalidValue);
    auto cold = seq(Role::expert, {{1, 0.5}});
    cold.temperature = 0.0;
    CHECK(kind_of([&] { validate(cold); }) == ErrorKind::InvalidValue);
}

TEST_CASE("alignment checks tokenizer, length and ids") {
    const auto e = seq(Role::expert, {{1, 0.5}, {2, 0.5}, {3, 0.5}});
    CHECK(validate_alignment(e, seq(Role::amateur, {{1, 0.1}, {2, 0.2}, {3, 0.3}})).size() == 3);
    CHECK(kind_of([&] { validate_alignment(e, seq(Role::amateur, {{1, 0.1}}, "other")); }) ==
          ErrorKind::TokenizerMismatch);
    CHECK(kind_of([&] { validate_alignment(e, seq(Role::amateur, {{1, 0.1}, {2, 0.2}})); }) ==
          ErrorKind::LengthMismatch);
    try {
        validate_alignment(e, seq(Role::amateur, {{1, 0.1}, {2, 0.2}, {4, 0.3}}));
        FAIL("expected TokenMismatch");
    } catch (const Error &err) {
        CHECK(err.kind() == ErrorKind::TokenMismatch);
        CHECK(std::string(err.what()).find("position 2") != std::string::npos);
    }
}

TEST_CASE("scorer specs parse with defaults and round-trip") {
    const auto c = parse_scorer_spec("contrast");
    CHECK(c.kind == ScorerKind::contrast);
    CHECK(c.gamma == 0.1);
    CHECK(c.weighting == Weighting::mean);
    CHECK(c.log_base == LogBase::ten);
    CHECK(c.prob_floor == 1e-10);
    CHECK(parse_scorer_spec("ensemble_weighted").gamma == 0.5);
    CHECK(parse_scorer_spec("cd_score").top_k == 10);
    for (const auto *text : {"contrast:gamma=0.25:weighting=sum:base=e", "single:role=amateur", "ensemble_avg",
                             "cd_score:top_k=3:sentinel=-30", "division:floor=1e-12"}) {
        const auto s = parse_scorer_spec(text);
        CHECK(parse_scorer_spec(s.canonical()) == s);
    }
    CHECK(parse_scorer_spec("contrast:id=cs").scorer_id() == "cs");
}

TEST_CASE("bad scorer specs are configuration errors") {
    for (const auto *text : {"contrast:gamma=1.5", "contrast:gamma=-0.1", "nonsense", "contrast:weighting=median",
                             "contrast:floor=0", "contrast:top_k=3", "ensemble_avg:gamma=0.3", "contrast:gamma=abc",
                             "contrast:color=red", "cd_score:top_k=0"}) {
        INFO(text);
        CHECK(kind_of([&] { parse_scorer_spec(text); }) == ErrorKind::Config);
    }
}

TEST_CASE("score table rejects non-finite values and merges") {
    ScoreTable t;
    const InstanceKey k{"d", "1", "s"};
    t.set(k, "x", -0.5);
    CHECK(t.get(k, "x") == -0.5);
    CHECK_FALSE(t.get(k, "y"));
    CHECK_THROWS_AS(t.set(k, "y", std::numeric_limits<double>::infinity()), Error);
    ScoreTable u;
    u.set({"d", "2", "s"}, "y", 1.0);
    t.merge(u);
    CHECK(t.size() == 2);
    CHECK(t.scorer_ids() == std::vector<std::string>{"x", "y"});
}
