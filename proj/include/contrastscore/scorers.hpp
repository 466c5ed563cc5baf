#pragma once

#include "contrastscore/types.hpp"

#include <cstddef>
#include <vector>

namespace contrastscore {

struct TokenTerm {
    std::size_t position = 0;
    double combined_prob = 0.0; // probability fed to the log (NaN where the scorer has none, e.g. division)
    double log_term = 0.0;      // in the scorer's log base
};

/// Per-token view of a score. `total` is the weighting-aggregate of `log_term`.
struct TokenScoreBreakdown {
    std::vector<TokenTerm> per_token;
    double total = 0.0;
};

/// Mean (or sum) of log_base(max(p_t, floor)) over one stream.
double single_score(const TokenProbSequence &seq, const ScorerSpec &spec);

/// |p_exp - gamma * p_ama|
double contrast_token_prob(double p_exp, double p_ama, double gamma) noexcept;

/// Aggregate of log(max(|p_exp - gamma p_ama|, floor)).
TokenScoreBreakdown contrast_score(const AlignedPair &pair, const ScorerSpec &spec);

/// Aggregate log of gamma p_exp + (1 - gamma) p_ama; ensemble_avg pins gamma to 0.5.
double ensemble_score(const AlignedPair &pair, const ScorerSpec &spec);

/// Contrastive-decoding objective: log(p_exp / p_ama) where the token is in the expert's
/// top-k at that position, a finite sentinel elsewhere. Throws MissingTopK when the
/// expert stream carries no top-k sets.
double cd_score(const AlignedPair &pair, const ScorerSpec &spec);

/// Aggregate of log(max(p_exp,floor)) - log(max(p_ama,floor)); diagnostic only.
double division_score(const AlignedPair &pair, const ScorerSpec &spec);

/// Dispatches on spec.kind and returns the full per-token breakdown.
TokenScoreBreakdown score_breakdown(const AlignedPair &pair, const ScorerSpec &spec);

/// Dispatches on spec.kind.
double score(const AlignedPair &pair, const ScorerSpec &spec);

} // namespace contrastscore
