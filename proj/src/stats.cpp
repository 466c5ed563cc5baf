#include "contrastscore/stats.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace contrastscore::stats {

namespace {

double mean(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

bool constant(std::span<const double> xs) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return *lo == *hi;
}

void check_lengths(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw Error(ErrorKind::InvalidValue, "vectors differ in length: " + std::to_string(xs.size()) + " vs " +
                                                 std::to_string(ys.size()));
    if (xs.size() < 2) throw Error(ErrorKind::InvalidValue, "need at least 2 observations");
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
    check_lengths(xs, ys);
    if (constant(xs) || constant(ys)) throw Error(ErrorKind::DegenerateVariance, "constant input vector");
    const double mx = mean(xs), my = mean(ys);
    CompensatedSum sxy, sxx, syy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    const double denom = std::sqrt(sxx.value()) * std::sqrt(syy.value());
    if (!(denom > 0.0)) throw Error(ErrorKind::DegenerateVariance, "zero variance");
    return std::clamp(sxy.value() / denom, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        // positions i..j (0-based) share rank ((i+1)+(j+1))/2
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    check_lengths(xs, ys);
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

std::vector<double> zscore(std::span<const double> xs) {
    if (xs.empty()) return {};
    if (constant(xs)) throw Error(ErrorKind::DegenerateVariance, "constant input vector");
    const double m = mean(xs);
    CompensatedSum ss;
    for (double x : xs) ss.add((x - m) * (x - m));
    const double sd = std::sqrt(ss.value() / static_cast<double>(xs.size()));
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back((x - m) / sd);
    return out;
}

PairwiseCounts pairwise_accuracy(std::span<const PairItem> items, Grouping grouping, TiePolicy policy) {
    // Bucket indices by segment so within_segment only pairs hypotheses of one source.
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (grouping == Grouping::within_segment)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return items[a].segment_id < items[b].segment_id; });

    struct Diff {
        double abs_metric;
        int human_sign;
        int metric_sign;
    };
    std::vector<Diff> diffs;
    auto visit = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a)
            for (std::size_t b = a + 1; b < hi; ++b) {
                const auto &x = items[order[a]];
                const auto &y = items[order[b]];
                const double dm = x.metric - y.metric;
                diffs.push_back({std::fabs(dm), sign(x.human - y.human), sign(dm)});
            }
    };
    if (grouping == Grouping::global) {
        visit(0, order.size());
    } else {
        std::size_t start = 0;
        for (std::size_t i = 1; i <= order.size(); ++i)
            if (i == order.size() || items[order[i]].segment_id != items[order[start]].segment_id) {
                visit(start, i);
                start = i;
            }
    }

    PairwiseCounts out;
    for (const auto &d : diffs)
        if (d.human_sign == 0) ++out.pairs_tied_human;

    if (policy == TiePolicy::exclude_human_ties) {
        long correct = 0;
        for (const auto &d : diffs) {
            if (d.human_sign == 0) continue;
            ++out.pairs_total;
            if (d.metric_sign == 0) ++out.pairs_tied_metric;
            else if (d.metric_sign == d.human_sign) ++correct;
        }
        if (out.pairs_total == 0) throw Error(ErrorKind::NoComparablePairs, "every pair is tied in human scores");
        out.accuracy = static_cast<double>(correct) / static_cast<double>(out.pairs_total);
        return out;
    }

    if (diffs.empty()) throw Error(ErrorKind::NoComparablePairs, "no pairs to compare");
    // Sweep epsilon over the sorted |metric differences|. Pairs at or below epsilon are
    // metric ties (correct iff human tie); pairs above are correct iff signs agree.
    std::sort(diffs.begin(), diffs.end(), [](const Diff &a, const Diff &b) { return a.abs_metric < b.abs_metric; });
    long above_correct = 0;
    for (const auto &d : diffs)
        if (d.metric_sign != 0 && d.metric_sign == d.human_sign) ++above_correct;
    long tied_correct = 0;
    long best_correct = -1;
    std::size_t best_tied = 0;
    double best_eps = 0.0;
    std::size_t i = 0;
    double eps = 0.0; // the first candidate ties only exact zeros
    while (true) {
        while (i < diffs.size() && diffs[i].abs_metric <= eps) {
            if (diffs[i].human_sign == 0) ++tied_correct;
            if (diffs[i].metric_sign != 0 && diffs[i].metric_sign == diffs[i].human_sign) --above_correct;
            ++i;
        }
        const long correct = tied_correct + above_correct;
        if (correct > best_correct) {
            best_correct = correct;
            best_tied = i;
            best_eps = eps;
        }
        if (i == diffs.size()) break;
        eps = diffs[i].abs_metric;
    }
    out.pairs_total = static_cast<long>(diffs.size());
    out.pairs_tied_metric = static_cast<long>(best_tied);
    out.tie_epsilon = best_eps;
    out.accuracy = static_cast<double>(best_correct) / static_cast<double>(diffs.size());
    return out;
}

BiasCounts bias_score(std::span<const double> likelihoods, std::span<const double> metric_scores,
                      std::span<const double> human_scores, UnfairnessMode mode) {
    check_lengths(likelihoods, metric_scores);
    check_lengths(likelihoods, human_scores);
    if (constant(likelihoods)) throw Error(ErrorKind::DegenerateVariance, "likelihood scores are constant");
    const auto zm = zscore(metric_scores);
    const auto zh = zscore(human_scores);
    std::vector<double> us(zm.size());
    for (std::size_t i = 0; i < us.size(); ++i) {
        us[i] = zm[i] - zh[i];
        if (mode == UnfairnessMode::absolute_difference) us[i] = std::fabs(us[i]);
        // equal z-score gaps can differ in the last bits; snap so they rank as ties
        us[i] = std::round(us[i] * 1e12) / 1e12;
    }
    BiasCounts out;
    out.n = static_cast<long>(us.size());
    const auto [lo, hi] = std::minmax_element(us.begin(), us.end());
    if (*hi - *lo <= 1e-9) {
        out.degenerate = true;
        return out;
    }
    out.bias = spearman(likelihoods, us);
    return out;
}

std::string to_string(Grouping g) { return g == Grouping::within_segment ? "within_segment" : "global"; }
std::string to_string(TiePolicy p) {
    return p == TiePolicy::exclude_human_ties ? "exclude_human_ties" : "tie_calibrated";
}

Grouping parse_grouping(const std::string &text) {
    if (text == "within_segment") return Grouping::within_segment;
    if (text == "global") return Grouping::global;
    throw Error(ErrorKind::Config, "grouping must be within_segment or global");
}

TiePolicy parse_tie_policy(const std::string &text) {
    if (text == "exclude_human_ties" || text == "default") return TiePolicy::exclude_human_ties;
    if (text == "tie_calibrated" || text == "calibrated") return TiePolicy::tie_calibrated;
    throw Error(ErrorKind::Config, "tie policy must be exclude_human_ties or tie_calibrated");
}

} // namespace contrastscore::stats
