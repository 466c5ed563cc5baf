#pragma once

#include <span>
#include <string>
#include <vector>

namespace contrastscore::stats {

/// Sample Pearson coefficient. Throws InvalidValue on length mismatch or n < 2 and
/// DegenerateVariance when either vector is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Fractional ranks starting at 1; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson over average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// (x - mean) / population standard deviation. Throws DegenerateVariance on a constant vector.
std::vector<double> zscore(std::span<const double> xs);

struct PairItem {
    std::string segment_id;
    std::string system_id;
    double metric = 0.0;
    double human = 0.0;
};

enum class Grouping { within_segment, global };

enum class TiePolicy {
    /// Human-tied pairs are dropped; a metric tie on a human-untied pair counts as wrong.
    exclude_human_ties,
    /// All pairs count; the metric is tied when |difference| <= epsilon, with epsilon
    /// chosen to maximise agreement (ties agree with ties).
    tie_calibrated,
};

struct PairwiseCounts {
    double accuracy = 0.0;
    long pairs_total = 0;       // pairs entering the denominator
    long pairs_tied_human = 0;  // human ties seen among comparable pairs
    long pairs_tied_metric = 0; // metric ties among counted pairs
    double tie_epsilon = 0.0;   // tie_calibrated only
};

/// Throws NoComparablePairs when nothing enters the denominator.
PairwiseCounts pairwise_accuracy(std::span<const PairItem> items, Grouping grouping, TiePolicy policy);

enum class UnfairnessMode { signed_difference, absolute_difference };

struct BiasCounts {
    double bias = 0.0;
    long n = 0;
    bool degenerate = false; // unfairness scores constant; bias reported as 0
};

/// Spearman(LS, US) with US = z(metric) - z(human) (or its absolute value).
/// US is rounded to 1e-12 before ranking. US spread below 1e-9 is treated as constant:
/// bias 0, degenerate flagged.
/// Throws DegenerateVariance when likelihoods, metric or human scores are constant.
BiasCounts bias_score(std::span<const double> likelihoods, std::span<const double> metric_scores,
                      std::span<const double> human_scores,
                      UnfairnessMode mode = UnfairnessMode::signed_difference);

std::string to_string(Grouping g);
std::string to_string(TiePolicy p);
Grouping parse_grouping(const std::string &text);
TiePolicy parse_tie_policy(const std::string &text);

} // namespace contrastscore::stats
