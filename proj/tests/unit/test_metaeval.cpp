#include "support.hpp"

#include "contrastscore/batch.hpp"
#include "contrastscore/metaeval.hpp"
#include "contrastscore/provider.hpp"
#include "contrastscore/scorers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace contrastscore;

namespace {

struct World {
    std::vector<EvaluationInstance> instances;
    std::vector<AlignedPair> pairs;
    std::map<InstanceKey, double> likelihoods;
};

// Two datasets in one group: "a" with two dimensions, "b" with one.
World make_world(int segments, int systems) {
    World w;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uint64_t seed = 0;
    for (const std::string ds : {"a", "b"})
        for (int seg = 0; seg < segments; ++seg)
            for (int sys = 0; sys < systems; ++sys) {
                EvaluationInstance inst;
                inst.key = {ds, std::to_string(seg), "sys" + std::to_string(sys)};
                inst.hypothesis = "h";
                auto pair = mock_generate(seed++, 6 + seg % 5, 0.4);
                const double quality = score(pair, parse_scorer_spec("contrast"));
                inst.human_scores["q"] = std::round(4.0 * (quality + 2.0 * u(rng))); // coarse: human ties happen
                if (ds == "a") inst.human_scores["r"] = u(rng);
                w.likelihoods[inst.key] = score(pair, parse_scorer_spec("single:base=e"));
                w.instances.push_back(inst);
                w.pairs.push_back(pair);
            }
    return w;
}

ScoreTable table_for(const World &w, const std::vector<std::string> &specs) {
    ScoreTable t;
    for (const auto &text : specs) {
        const auto spec = parse_scorer_spec(text);
        for (std::size_t i = 0; i < w.pairs.size(); ++i) t.set(w.instances[i].key, spec.scorer_id(), score(w.pairs[i], spec));
    }
    return t;
}

const std::vector<DatasetSpec> kDatasets{{"a", "g", {"q", "r"}}, {"b", "g", {"q"}}};

} // namespace

TEST_CASE("pooled correlation equals pearson over the cell's rows") {
    const auto w = make_world(8, 5);
    const auto t = table_for(w, {"contrast"});
    const auto report = evaluate(w.instances, t, w.likelihoods, {}, kDatasets);
    REQUIRE(report.correlations.size() == 3);
    std::vector<double> xs, ys;
    for (const auto &inst : w.instances)
        if (inst.key.dataset_id == "a") {
            xs.push_back(*t.get(inst.key, t.scorer_ids()[0]));
            ys.push_back(inst.human_scores.at("r"));
        }
    CHECK(*report.correlations[1].coefficient == doctest::Approx(stats::pearson(xs, ys)).epsilon(1e-14));
    CHECK(report.correlations[1].n == 40);
}

TEST_CASE("dataset and group averages") {
    const auto w = make_world(6, 4);
    const auto report = evaluate(w.instances, table_for(w, {"contrast"}), {}, {}, kDatasets);
    const auto &c = report.correlations;
    REQUIRE(report.averages.size() == 3); // a, b, group g
    CHECK(*report.averages[0].average == doctest::Approx((*c[0].coefficient + *c[1].coefficient) / 2));
    CHECK(report.averages[2].scope == "group");
    CHECK(report.averages[2].cells == 3);
    CHECK(*report.averages[2].average ==
          doctest::Approx((*c[0].coefficient + *c[1].coefficient + *c[2].coefficient) / 3));
    CHECK(report.bias.empty()); // no likelihoods
}

TEST_CASE("per-system pooling averages within-system correlations") {
    const auto w = make_world(10, 3);
    const auto t = table_for(w, {"single"});
    MetaConfig cfg;
    cfg.pooling = CorrelationPooling::per_system;
    cfg.method = CorrelationMethod::spearman;
    const auto report = evaluate(w.instances, t, {}, cfg, kDatasets);
    double sum = 0;
    for (int sys = 0; sys < 3; ++sys) {
        std::vector<double> xs, ys;
        for (const auto &inst : w.instances)
            if (inst.key.dataset_id == "b" && inst.key.system_id == "sys" + std::to_string(sys)) {
                xs.push_back(*t.get(inst.key, t.scorer_ids()[0]));
                ys.push_back(inst.human_scores.at("q"));
            }
        sum += stats::spearman(xs, ys);
    }
    CHECK(*report.correlations[2].coefficient == doctest::Approx(sum / 3).epsilon(1e-14));
}

TEST_CASE("degenerate cells become warnings and null coefficients") {
    auto w = make_world(3, 3);
    for (auto &inst : w.instances) inst.human_scores["r"] = 1.0;
    const auto report = evaluate(w.instances, table_for(w, {"contrast"}), w.likelihoods, {}, kDatasets);
    CHECK_FALSE(report.correlations[1].coefficient.has_value());
    CHECK_FALSE(report.warnings.empty());
    CHECK(report_jsonl(report).find("\"coefficient\":null") != std::string::npos);
}

TEST_CASE("missing scores are dropped and counted") {
    const auto w = make_world(4, 4);
    ScoreTable t;
    for (std::size_t i = 0; i < w.instances.size(); i += 2) t.set(w.instances[i].key, "m", static_cast<double>(i % 7));
    const auto report = evaluate(w.instances, t, {}, {}, kDatasets);
    CHECK(report.correlations[0].dropped == 8);
    CHECK(report.correlations[0].n == 8);
}

TEST_CASE("log base does not change correlations or pairwise accuracy") {
    const auto w = make_world(12, 5);
    const auto ten = table_for(w, {"contrast:id=x"});
    const auto nat = table_for(w, {"contrast:base=e:id=x"});
    for (auto method : {CorrelationMethod::pearson, CorrelationMethod::spearman})
        for (auto policy : {stats::TiePolicy::exclude_human_ties, stats::TiePolicy::tie_calibrated}) {
            MetaConfig cfg;
            cfg.method = method;
            cfg.tie_policy = policy;
            const auto a = evaluate(w.instances, ten, w.likelihoods, cfg, kDatasets);
            const auto b = evaluate(w.instances, nat, w.likelihoods, cfg, kDatasets);
            for (std::size_t i = 0; i < a.correlations.size(); ++i)
                CHECK(std::fabs(*a.correlations[i].coefficient - *b.correlations[i].coefficient) <= 1e-12);
            for (std::size_t i = 0; i < a.pairwise.size(); ++i) CHECK(*a.pairwise[i].accuracy == *b.pairwise[i].accuracy);
        }
}

TEST_CASE("reports are identical for every thread count") {
    const auto w = make_world(10, 6);
    const auto t = table_for(w, {"contrast", "single", "ensemble_avg"});
    std::string first;
    for (int threads : {1, 2, 4, 8}) {
        MetaConfig cfg;
        cfg.threads = threads;
        const auto r = evaluate(w.instances, t, w.likelihoods, cfg, kDatasets);
        const auto text = report_jsonl(r) + report_text(r);
        if (first.empty()) first = text;
        CHECK(text == first);
    }
}

TEST_CASE("report records carry schema version and kind") {
    const auto w = make_world(4, 3);
    const auto r = evaluate(w.instances, table_for(w, {"contrast"}), w.likelihoods, {}, kDatasets);
    std::istringstream in(report_jsonl(r));
    std::string line;
    std::set<std::string> kinds;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("schema_version") == 1);
        kinds.insert(j.at("record").get<std::string>());
    }
    for (const auto *k : {"correlation", "average", "pairwise", "bias"}) CHECK(kinds.count(k));
}
