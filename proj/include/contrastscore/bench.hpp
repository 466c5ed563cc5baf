#pragma once

#include "contrastscore/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace contrastscore {

struct BenchResult {
    std::string scorer_id;
    double samples_per_second = 0.0; // sample_count / wall_time
    std::size_t batch_size = 0;
    double wall_time = 0.0;          // seconds, median timed pass
    std::size_t sample_count = 0;    // samples in one timed pass
    std::size_t warmup_count = 0;    // samples scored untimed before timing
    std::size_t passes = 0;
    double checksum = 0.0;           // sum of scores of the last pass
};

/// Scores one batch; returns the sum of its scores (kept so work is not optimised away).
using BatchScorer = std::function<double(std::span<const AlignedPair>)>;

struct BenchTarget {
    std::string id;
    BatchScorer score;
};

struct BenchOptions {
    std::size_t batch_size = 16;
    std::size_t warmup_batches = 2;
    std::size_t passes = 5;
    int threads = 0;
    /// Re-parse the interchange text of every batch inside the timed region.
    bool end_to_end = false;
};

/// Times each target over the workload after `warmup_batches` untimed batches. Each
/// timed pass scores every remaining batch; the median pass sets wall_time.
/// Throws InsufficientWorkload unless the workload holds more than warmup_batches batches.
std::vector<BenchResult> run_bench(std::span<const AlignedPair> workload, const std::vector<BenchTarget> &targets,
                                   const BenchOptions &options);

/// Same, for scorer specs run through the OpenMP batch kernel.
std::vector<BenchResult> run_bench(std::span<const AlignedPair> workload, const std::vector<ScorerSpec> &specs,
                                   const BenchOptions &options);

/// samples_per_second(a) / samples_per_second(b).
double throughput_ratio(const BenchResult &a, const BenchResult &b);

std::string bench_jsonl(const std::vector<BenchResult> &results);
std::string bench_text(const std::vector<BenchResult> &results);

} // namespace contrastscore
