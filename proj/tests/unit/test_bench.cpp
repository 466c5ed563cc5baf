#include "contrastscore/batch.hpp"
#include "contrastscore/bench.hpp"
#include "contrastscore/error.hpp"
#include "contrastscore/provider.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <sstream>

using namespace contrastscore;

namespace {

std::vector<AlignedPair> workload(std::size_t n, std::size_t len = 48) {
    std::vector<AlignedPair> w;
    for (std::size_t i = 0; i < n; ++i) w.push_back(mock_generate(i, len, 0.3, 5));
    return w;
}

// Timing checks retry a couple of times so one scheduler hiccup does not fail the build.
template <typename Fn> bool within_attempts(int attempts, Fn &&fn) {
    for (int i = 0; i < attempts; ++i)
        if (fn()) return true;
    return false;
}

} // namespace

TEST_CASE("bench result arithmetic holds") {
    const auto w = workload(2000);
    BenchOptions opts;
    const auto results = run_bench(w, std::vector<ScorerSpec>{parse_scorer_spec("contrast"), parse_scorer_spec("cd_score")}, opts);
    REQUIRE(results.size() == 2);
    for (const auto &r : results) {
        CHECK(r.batch_size == 16);
        CHECK(r.warmup_count == 32);
        CHECK(r.sample_count == 2000 - 32);
        CHECK(r.passes == 5);
        CHECK(std::fabs(r.samples_per_second * r.wall_time - static_cast<double>(r.sample_count)) <=
              1e-9 * static_cast<double>(r.sample_count));
    }
}

TEST_CASE("self comparison ratio is close to one") {
    const auto w = workload(4000);
    const auto spec = parse_scorer_spec("contrast");
    auto target = [&](std::span<const AlignedPair> b) {
        double s = 0;
        for (double v : score_batch(b, spec).scores) s += v;
        return s;
    };
    BenchOptions opts;
    opts.passes = 7;
    CHECK(within_attempts(3, [&] {
        const auto r = run_bench(w, std::vector<BenchTarget>{{"a", target}, {"b", target}}, opts);
        const double ratio = throughput_ratio(r[1], r[0]);
        MESSAGE("self ratio " << ratio);
        return ratio >= 0.8 && ratio <= 1.25;
    }));
}

TEST_CASE("doubling the workload roughly doubles wall time") {
    const auto small = workload(1500, 16), big = workload(3000, 16);
    BenchOptions opts;
    opts.warmup_batches = 0;
    opts.passes = 7;
    const std::vector<ScorerSpec> specs{parse_scorer_spec("contrast")};
    CHECK(within_attempts(3, [&] {
        const double t1 = run_bench(small, specs, opts)[0].wall_time;
        const double t2 = run_bench(big, specs, opts)[0].wall_time;
        MESSAGE("time ratio " << t2 / t1);
        return t2 / t1 >= 2.0 * 0.7 && t2 / t1 <= 2.0 * 1.3;
    }));
}

TEST_CASE("serial and OpenMP targets agree on the checksum") {
    const auto w = workload(500);
    const auto spec = parse_scorer_spec("ensemble_avg");
    auto sum = [](const BatchScores &s) {
        double t = 0;
        for (double v : s.scores) t += v;
        return t;
    };
    const auto r = run_bench(w,
                             std::vector<BenchTarget>{
                                 {"serial", [&](auto b) { return sum(score_batch_serial(b, spec)); }},
                                 {"openmp", [&](auto b) { return sum(score_batch(b, spec, 4)); }},
                             },
                             {});
    CHECK(r[0].checksum == r[1].checksum);
}

TEST_CASE("end-to-end mode parses inside the timed region and scores the same") {
    const auto w = workload(200, 16);
    BenchOptions plain, e2e;
    e2e.end_to_end = true;
    const std::vector<ScorerSpec> specs{parse_scorer_spec("contrast")};
    CHECK(run_bench(w, specs, plain)[0].checksum == run_bench(w, specs, e2e)[0].checksum);
}

TEST_CASE("too little work is rejected") {
    const auto w = workload(20);
    try {
        run_bench(w, std::vector<ScorerSpec>{parse_scorer_spec("contrast")}, {});
        FAIL("expected InsufficientWorkload");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::InsufficientWorkload);
    }
}

TEST_CASE("bench records are schema-versioned with a ratio line") {
    const auto w = workload(100, 8);
    const auto r = run_bench(w, std::vector<ScorerSpec>{parse_scorer_spec("contrast"), parse_scorer_spec("single")}, {});
    std::istringstream in(bench_jsonl(r));
    std::string line;
    int bench = 0, ratio = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["schema_version"] == 1);
        if (j["record"] == "bench") {
            ++bench;
            for (const auto *f : {"scorer_id", "samples_per_second", "batch_size", "wall_time", "sample_count"})
                CHECK(j.contains(f));
        } else if (j["record"] == "ratio") {
            ++ratio;
        }
    }
    CHECK(bench == 2);
    CHECK(ratio == 1);
}
