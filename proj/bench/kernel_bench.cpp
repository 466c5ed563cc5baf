// Serial reference loop vs the OpenMP batch kernel on a mock workload.
#include "contrastscore/batch.hpp"
#include "contrastscore/bench.hpp"
#include "contrastscore/provider.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace contrastscore;

int main(int argc, char **argv) {
    std::size_t samples = 8192, length = 64, batch = 256;
    int threads = 0;
    std::string scorer = "contrast:gamma=0.1";
    CLI::App app{"kernel_bench"};
    app.add_option("--samples", samples);
    app.add_option("--length", length);
    app.add_option("--batch-size", batch);
    app.add_option("--threads", threads);
    app.add_option("--scorer", scorer);
    CLI11_PARSE(app, argc, argv);

    std::vector<AlignedPair> workload;
    workload.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) workload.push_back(mock_generate(1000 + i, length, 0.3, 10));
    const auto spec = parse_scorer_spec(scorer);

    auto sum = [](const BatchScores &s) {
        double t = 0.0;
        for (double v : s.scores) t += v;
        return t;
    };
    std::vector<BenchTarget> targets{
        {"serial", [&](std::span<const AlignedPair> b) { return sum(score_batch_serial(b, spec)); }},
        {"openmp", [&](std::span<const AlignedPair> b) { return sum(score_batch(b, spec, threads)); }},
    };
    BenchOptions opts;
    opts.batch_size = batch;
    const auto results = run_bench(workload, targets, opts);
    std::cout << bench_text(results);
    if (results[0].checksum != results[1].checksum) {
        std::cerr << "checksum mismatch: " << results[0].checksum << " vs " << results[1].checksum << '\n';
        return 1;
    }
    return 0;
}
