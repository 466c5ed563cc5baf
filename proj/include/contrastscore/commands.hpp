#pragma once

#include "contrastscore/baselines.hpp"
#include "contrastscore/ingest.hpp"
#include "contrastscore/scorers.hpp"
#include "contrastscore/types.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contrastscore {

/// One --scorer column: either a probability scorer or a reference-based baseline
/// (bleu, chrf, rouge1, rouge2, rougel).
struct MetricRequest {
    std::string id;
    std::optional<ScorerSpec> spec;
    std::optional<std::string> baseline;
};

MetricRequest parse_metric(const std::string &text);

struct ScoreRun {
    ScoreTable table;
    std::vector<std::pair<InstanceKey, std::string>> failures; // key, diagnostic (includes scorer id)
};

/// Scores every key in `keys` with every request. Missing pairs / references and scorer
/// errors become failures; nothing aborts the run.
ScoreRun score_all(const std::vector<MetricRequest> &requests, const std::vector<InstanceKey> &keys,
                   const std::map<InstanceKey, AlignedPair> &pairs,
                   const std::map<InstanceKey, EvaluationInstance> &instances,
                   const std::map<InstanceKey, std::string> &pair_problems, int threads);

/// Parses "0:1:0.05" (inclusive range) or "0,0.1,0.2"; values are rounded to 1e-9.
std::vector<double> parse_grid(const std::string &text);

/// Rank 1 = highest score; ties share the smallest rank.
std::vector<int> descending_ranks(const std::vector<double> &scores);

/// Entry point behind the contrastscore executable. Exit codes: 0 success, 1 data error,
/// 2 configuration error.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace contrastscore
