#pragma once

#include "contrastscore/error.hpp"
#include "contrastscore/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace contrastscore {

/// Scores for a batch plus the failure (if any) for each slot. A failed slot's
/// score is NaN and never reaches a ScoreTable.
struct BatchScores {
    std::vector<double> scores;
    std::vector<std::optional<Error>> errors;

    bool ok() const noexcept;
};

/// OpenMP kernel: one pair per iteration, static schedule, no shared accumulators,
/// so results are independent of `threads`. threads <= 0 means the OpenMP default.
BatchScores score_batch(std::span<const AlignedPair> pairs, const ScorerSpec &spec, int threads = 0);

/// Plain loop over the same per-pair scorer; the reference the kernel is tested against.
BatchScores score_batch_serial(std::span<const AlignedPair> pairs, const ScorerSpec &spec);

/// Parallel index map for other per-instance work (text baselines). fn(i) may throw.
BatchScores parallel_map(std::size_t n, const std::function<double(std::size_t)> &fn, int threads = 0);

/// Number of threads OpenMP would use by default (1 when built without OpenMP).
int default_threads();

} // namespace contrastscore
