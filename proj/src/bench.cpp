#include "contrastscore/bench.hpp"

#include "contrastscore/batch.hpp"
#include "contrastscore/error.hpp"
#include "contrastscore/interchange.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

namespace contrastscore {

std::vector<BenchResult> run_bench(std::span<const AlignedPair> workload, const std::vector<BenchTarget> &targets,
                                   const BenchOptions &options) {
    if (options.batch_size == 0) throw Error(ErrorKind::Config, "batch size must be positive");
    const std::size_t batches = (workload.size() + options.batch_size - 1) / options.batch_size;
    if (batches < options.warmup_batches + 1)
        throw Error(ErrorKind::InsufficientWorkload, std::to_string(workload.size()) + " samples make " +
                                                         std::to_string(batches) + " batches; need at least " +
                                                         std::to_string(options.warmup_batches + 1));
    const std::size_t warmup = std::min(workload.size(), options.warmup_batches * options.batch_size);
    const auto timed = workload.subspan(warmup);
    const std::size_t passes = std::max<std::size_t>(1, options.passes);

    std::vector<BenchResult> results;
    for (const auto &target : targets) {
        double checksum = 0.0;
        for (std::size_t b = 0; b < warmup; b += options.batch_size)
            checksum += target.score(workload.subspan(b, std::min(options.batch_size, warmup - b)));

        std::vector<double> times;
        for (std::size_t p = 0; p < passes; ++p) {
            checksum = 0.0;
            const auto start = std::chrono::steady_clock::now();
            for (std::size_t b = 0; b < timed.size(); b += options.batch_size)
                checksum += target.score(timed.subspan(b, std::min(options.batch_size, timed.size() - b)));
            const auto stop = std::chrono::steady_clock::now();
            times.push_back(std::max(std::chrono::duration<double>(stop - start).count(), 1e-9));
        }
        std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
        BenchResult r;
        r.scorer_id = target.id;
        r.batch_size = options.batch_size;
        r.wall_time = times[times.size() / 2];
        r.sample_count = timed.size();
        r.warmup_count = warmup;
        r.passes = passes;
        r.samples_per_second = static_cast<double>(r.sample_count) / r.wall_time;
        r.checksum = checksum;
        results.push_back(r);
    }
    return results;
}

std::vector<BenchResult> run_bench(std::span<const AlignedPair> workload, const std::vector<ScorerSpec> &specs,
                                   const BenchOptions &options) {
    std::vector<std::string> encoded;
    if (options.end_to_end) {
        encoded.reserve(2 * workload.size());
        for (const auto &pair : workload) {
            encoded.push_back(encode_record({pair.key(), pair.expert()}));
            encoded.push_back(encode_record({pair.key(), pair.amateur()}));
        }
    }
    std::vector<BenchTarget> targets;
    for (const auto &spec : specs) {
        validate(spec);
        BatchScorer fn;
        if (options.end_to_end) {
            fn = [&, spec](std::span<const AlignedPair> batch) {
                const auto first = static_cast<std::size_t>(batch.data() - workload.data());
                std::vector<AlignedPair> parsed;
                parsed.reserve(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    auto e = decode_record(encoded[2 * (first + i)]);
                    auto a = decode_record(encoded[2 * (first + i) + 1]);
                    parsed.push_back(validate_alignment(std::move(e.sequence), std::move(a.sequence), e.key));
                }
                const auto out = score_batch(parsed, spec, options.threads);
                double sum = 0.0;
                for (double s : out.scores) sum += s;
                return sum;
            };
        } else {
            fn = [spec, threads = options.threads](std::span<const AlignedPair> batch) {
                const auto out = score_batch(batch, spec, threads);
                double sum = 0.0;
                for (double s : out.scores) sum += s;
                return sum;
            };
        }
        targets.push_back({spec.scorer_id(), std::move(fn)});
    }
    return run_bench(workload, targets, options);
}

double throughput_ratio(const BenchResult &a, const BenchResult &b) { return a.samples_per_second / b.samples_per_second; }

std::string bench_jsonl(const std::vector<BenchResult> &results) {
    std::ostringstream out;
    for (const auto &r : results) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "bench";
        j["scorer_id"] = r.scorer_id;
        j["samples_per_second"] = r.samples_per_second;
        j["batch_size"] = r.batch_size;
        j["wall_time"] = r.wall_time;
        j["sample_count"] = r.sample_count;
        j["warmup_count"] = r.warmup_count;
        j["passes"] = r.passes;
        out << j.dump() << '\n';
    }
    for (std::size_t i = 1; i < results.size(); ++i) {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["record"] = "ratio";
        j["numerator"] = results[i].scorer_id;
        j["denominator"] = results[0].scorer_id;
        j["ratio"] = throughput_ratio(results[i], results[0]);
        out << j.dump() << '\n';
    }
    return out.str();
}

std::string bench_text(const std::vector<BenchResult> &results) {
    std::ostringstream out;
    std::size_t width = 10;
    for (const auto &r : results) width = std::max(width, r.scorer_id.size());
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %14s %8s %10s %12s %8s\n", static_cast<int>(width), "scorer", "samples/s",
                  "batch", "samples", "wall(s)", "ratio");
    out << buf;
    for (const auto &r : results) {
        std::snprintf(buf, sizeof buf, "%-*s %14.1f %8zu %10zu %12.6f %8.3f\n", static_cast<int>(width),
                      r.scorer_id.c_str(), r.samples_per_second, r.batch_size, r.sample_count, r.wall_time,
                      throughput_ratio(r, results.front()));
        out << buf;
    }
    return out.str();
}

} // namespace contrastscore
