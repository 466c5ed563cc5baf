#pragma once

#include "contrastscore/stats.hpp"
#include "contrastscore/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contrastscore {

struct CorrelationResult {
    std::string dataset_id;
    std::string dimension;
    std::string scorer_id;
    std::optional<double> coefficient; // empty when undefined (degenerate / too few points)
    long n = 0;
    long dropped = 0;
};

struct BiasResult {
    std::string dataset_id;
    std::string dimension;
    std::string scorer_id;
    std::optional<double> bias;
    long n = 0;
    bool degenerate = false;
};

struct PairwiseResult {
    std::string dataset_id;
    std::string dimension;
    std::string scorer_id;
    std::optional<double> accuracy;
    long pairs_total = 0;
    long pairs_tied_human = 0;
    long pairs_tied_metric = 0;
    double tie_epsilon = 0.0;
};

/// Mean of the defined cells for one scorer over a dataset's dimensions (scope "dataset")
/// or over every (dataset, dimension) cell of a group such as all MQM22 language pairs.
struct AverageResult {
    std::string scope; // "dataset" or "group"
    std::string name;
    std::string scorer_id;
    std::optional<double> average;
    long cells = 0;
};

struct DatasetSpec {
    std::string dataset_id;
    std::string group;                   // defaults to dataset_id
    std::vector<std::string> dimensions; // report column order
};

enum class CorrelationMethod { pearson, spearman };
enum class CorrelationPooling { pooled, per_system };

struct MetaConfig {
    CorrelationMethod method = CorrelationMethod::pearson;
    CorrelationPooling pooling = CorrelationPooling::pooled;
    stats::Grouping grouping = stats::Grouping::within_segment;
    stats::TiePolicy tie_policy = stats::TiePolicy::exclude_human_ties;
    stats::UnfairnessMode unfairness = stats::UnfairnessMode::signed_difference;
    /// Dimension used for pairwise accuracy; empty means each dataset's first dimension.
    std::string pairwise_dimension;
    bool compute_pairwise = true;
    bool compute_bias = true;
    int threads = 0;
};

struct MetaReport {
    std::vector<CorrelationResult> correlations;
    std::vector<AverageResult> averages;
    std::vector<PairwiseResult> pairwise;
    std::vector<BiasResult> bias;
    std::vector<std::string> warnings;
    std::map<std::string, long> skipped; // per dataset, from ingestion
};

/// Runs the whole protocol. `likelihoods` holds the expert mean token log-probability per
/// instance (LS for the bias score); bias cells are skipped when it is empty. Degenerate
/// cells become warnings; the report is always produced.
MetaReport evaluate(const std::vector<EvaluationInstance> &instances, const ScoreTable &scores,
                    const std::map<InstanceKey, double> &likelihoods, const MetaConfig &config,
                    std::vector<DatasetSpec> datasets = {});

/// One JSON object per line, ordered and schema-versioned.
std::string report_jsonl(const MetaReport &report);

/// Tables laid out scorer x dimension with an AVG column.
std::string report_text(const MetaReport &report);

std::string to_string(CorrelationMethod m);
std::string to_string(CorrelationPooling p);
CorrelationMethod parse_correlation_method(const std::string &text);
CorrelationPooling parse_pooling(const std::string &text);

} // namespace contrastscore
