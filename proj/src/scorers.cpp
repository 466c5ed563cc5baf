#include "contrastscore/scorers.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace contrastscore {

namespace {

void require_kind(const ScorerSpec &spec, std::initializer_list<ScorerKind> kinds, const char *who) {
    if (std::find(kinds.begin(), kinds.end(), spec.kind) == kinds.end())
        throw Error(ErrorKind::WrongScorerKind, std::string(who) + " called with kind " +
                                                    std::string(to_string(spec.kind)));
}

double floored_log(double p, double floor) noexcept { return std::log(std::max(p, floor)); }

double to_base(double natural, LogBase base) noexcept {
    return base == LogBase::ten ? natural / kLn10 : natural;
}

/// Shared aggregation: `term(t)` returns {combined_prob, natural-log term} for position t.
/// Everything below is order-fixed so identical inputs give identical bits.
template <bool WithBreakdown, typename TermFn>
double aggregate(std::size_t m, const ScorerSpec &spec, TermFn &&term, TokenScoreBreakdown *out) {
    CompensatedSum sum;
    if constexpr (WithBreakdown) out->per_token.reserve(m);
    for (std::size_t t = 0; t < m; ++t) {
        const auto [combined, log_nat] = term(t);
        sum.add(log_nat);
        if constexpr (WithBreakdown) out->per_token.push_back({t, combined, to_base(log_nat, spec.log_base)});
    }
    double total = sum.value();
    if (spec.weighting == Weighting::mean) total /= static_cast<double>(m);
    total = to_base(total, spec.log_base);
    if constexpr (WithBreakdown) out->total = total;
    return total;
}

template <bool WithBreakdown>
double single_impl(const TokenProbSequence &seq, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    const double floor = spec.prob_floor;
    return aggregate<WithBreakdown>(
        seq.tokens.size(), spec,
        [&](std::size_t t) {
            const double p = seq.tokens[t].prob;
            return std::pair{p, floored_log(p, floor)};
        },
        out);
}

template <bool WithBreakdown>
double contrast_impl(const AlignedPair &pair, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    const auto &e = pair.expert().tokens;
    const auto &a = pair.amateur().tokens;
    const double gamma = spec.gamma, floor = spec.prob_floor;
    return aggregate<WithBreakdown>(
        e.size(), spec,
        [&](std::size_t t) {
            const double p = contrast_token_prob(e[t].prob, a[t].prob, gamma);
            return std::pair{p, floored_log(p, floor)};
        },
        out);
}

template <bool WithBreakdown>
double ensemble_impl(const AlignedPair &pair, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    const auto &e = pair.expert().tokens;
    const auto &a = pair.amateur().tokens;
    const double gamma = spec.kind == ScorerKind::ensemble_avg ? 0.5 : spec.gamma;
    const double floor = spec.prob_floor;
    return aggregate<WithBreakdown>(
        e.size(), spec,
        [&](std::size_t t) {
            const double p = gamma * e[t].prob + (1.0 - gamma) * a[t].prob;
            return std::pair{p, floored_log(p, floor)};
        },
        out);
}

bool in_head(const TokenProb &tok, int k) {
    const auto n = std::min<std::size_t>(tok.top_k.size(), static_cast<std::size_t>(k));
    return std::find(tok.top_k.begin(), tok.top_k.begin() + static_cast<std::ptrdiff_t>(n), tok.token_id) !=
           tok.top_k.begin() + static_cast<std::ptrdiff_t>(n);
}

template <bool WithBreakdown>
double cd_impl(const AlignedPair &pair, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    const auto &e = pair.expert().tokens;
    const auto &a = pair.amateur().tokens;
    if (!pair.expert().has_top_k())
        throw Error(ErrorKind::MissingTopK, "expert stream of " + pair.key().str() + " carries no top-k sets");
    const double floor = spec.prob_floor;
    const double sentinel = spec.cd_sentinel.value_or(std::log(floor));
    const int k = spec.top_k.value_or(1);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return aggregate<WithBreakdown>(
        e.size(), spec,
        [&](std::size_t t) {
            if (!in_head(e[t], k)) return std::pair{nan, sentinel};
            return std::pair{nan, floored_log(e[t].prob, floor) - floored_log(a[t].prob, floor)};
        },
        out);
}

template <bool WithBreakdown>
double division_impl(const AlignedPair &pair, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    const auto &e = pair.expert().tokens;
    const auto &a = pair.amateur().tokens;
    const double floor = spec.prob_floor;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return aggregate<WithBreakdown>(
        e.size(), spec,
        [&](std::size_t t) {
            return std::pair{nan, floored_log(e[t].prob, floor) - floored_log(a[t].prob, floor)};
        },
        out);
}

template <bool WithBreakdown>
double dispatch(const AlignedPair &pair, const ScorerSpec &spec, TokenScoreBreakdown *out) {
    switch (spec.kind) {
    case ScorerKind::single:
        return single_impl<WithBreakdown>(spec.role == Role::expert ? pair.expert() : pair.amateur(), spec, out);
    case ScorerKind::ensemble_avg:
    case ScorerKind::ensemble_weighted: return ensemble_impl<WithBreakdown>(pair, spec, out);
    case ScorerKind::contrast: return contrast_impl<WithBreakdown>(pair, spec, out);
    case ScorerKind::cd_score: return cd_impl<WithBreakdown>(pair, spec, out);
    case ScorerKind::division: return division_impl<WithBreakdown>(pair, spec, out);
    }
    throw Error(ErrorKind::WrongScorerKind, "unhandled scorer kind");
}

} // namespace

double single_score(const TokenProbSequence &seq, const ScorerSpec &spec) {
    require_kind(spec, {ScorerKind::single}, "single_score");
    return single_impl<false>(seq, spec, nullptr);
}

double contrast_token_prob(double p_exp, double p_ama, double gamma) noexcept {
    return std::fabs(p_exp - gamma * p_ama);
}

TokenScoreBreakdown contrast_score(const AlignedPair &pair, const ScorerSpec &spec) {
    require_kind(spec, {ScorerKind::contrast}, "contrast_score");
    TokenScoreBreakdown out;
    contrast_impl<true>(pair, spec, &out);
    return out;
}

double ensemble_score(const AlignedPair &pair, const ScorerSpec &spec) {
    require_kind(spec, {ScorerKind::ensemble_avg, ScorerKind::ensemble_weighted}, "ensemble_score");
    return ensemble_impl<false>(pair, spec, nullptr);
}

double cd_score(const AlignedPair &pair, const ScorerSpec &spec) {
    require_kind(spec, {ScorerKind::cd_score}, "cd_score");
    return cd_impl<false>(pair, spec, nullptr);
}

double division_score(const AlignedPair &pair, const ScorerSpec &spec) {
    require_kind(spec, {ScorerKind::division}, "division_score");
    return division_impl<false>(pair, spec, nullptr);
}

TokenScoreBreakdown score_breakdown(const AlignedPair &pair, const ScorerSpec &spec) {
    TokenScoreBreakdown out;
    dispatch<true>(pair, spec, &out);
    return out;
}

double score(const AlignedPair &pair, const ScorerSpec &spec) { return dispatch<false>(pair, spec, nullptr); }

} // namespace contrastscore
