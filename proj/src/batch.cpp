#include "contrastscore/batch.hpp"

#include "contrastscore/scorers.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace contrastscore {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename Fn> BatchScores run_parallel(std::size_t n, Fn &&fn, int threads) {
    BatchScores out;
    out.scores.assign(n, kNaN);
    out.errors.assign(n, std::nullopt);
    const auto count = static_cast<std::int64_t>(n);
#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nthreads)
#else
    (void)threads;
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        // exceptions must not cross the OpenMP region boundary
        try {
            out.scores[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
        } catch (const Error &e) {
            out.errors[static_cast<std::size_t>(i)] = e;
        } catch (const std::exception &e) {
            out.errors[static_cast<std::size_t>(i)] = Error(ErrorKind::InvalidValue, e.what());
        }
    }
    return out;
}

} // namespace

bool BatchScores::ok() const noexcept {
    return std::none_of(errors.begin(), errors.end(), [](const auto &e) { return e.has_value(); });
}

BatchScores score_batch(std::span<const AlignedPair> pairs, const ScorerSpec &spec, int threads) {
    validate(spec);
    return run_parallel(pairs.size(), [&](std::size_t i) { return score(pairs[i], spec); }, threads);
}

BatchScores score_batch_serial(std::span<const AlignedPair> pairs, const ScorerSpec &spec) {
    validate(spec);
    BatchScores out;
    out.scores.reserve(pairs.size());
    out.errors.reserve(pairs.size());
    for (const auto &pair : pairs) {
        try {
            out.scores.push_back(score(pair, spec));
            out.errors.emplace_back();
        } catch (const Error &e) {
            out.scores.push_back(kNaN);
            out.errors.emplace_back(e);
        }
    }
    return out;
}

BatchScores parallel_map(std::size_t n, const std::function<double(std::size_t)> &fn, int threads) {
    return run_parallel(n, fn, threads);
}

int default_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace contrastscore
