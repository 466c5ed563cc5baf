#pragma once

#include "contrastscore/error.hpp"
#include "contrastscore/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace contrastscore {

enum class Task { summarization, translation };
enum class DatasetFormat { summeval, qags, mqm };

struct DatasetManifest {
    std::string dataset_id;
    std::string group; // averaging group for reports; empty means dataset_id
    Task task = Task::summarization;
    DatasetFormat format = DatasetFormat::summeval;
    std::optional<std::pair<std::string, std::string>> language_pair; // (src, tgt)
    std::vector<std::string> dimensions;
    std::map<std::string, std::filesystem::path> paths; // role -> absolute path
    std::string annotators = "experts";                 // summeval: experts | turkers | all
};

/// Reads a JSON manifest; relative paths resolve against the manifest's directory.
/// Throws Config on invariant violations (translation without language_pair, no dimensions).
DatasetManifest load_manifest(const std::filesystem::path &path);
void validate(const DatasetManifest &manifest);

/// Penalties per MQM severity (lower-case), plus per-category overrides
/// ("non-translation" is critical regardless of the severity column).
struct SeverityWeights {
    std::map<std::string, double> severity{
        {"major", -5.0}, {"minor", -1.0}, {"critical", -25.0}, {"neutral", 0.0}, {"no-error", 0.0}};
    std::map<std::string, double> category{{"non-translation", -25.0}, {"non-translation!", -25.0}};

    /// Parses "major=-5,minor=-1,critical=-25" (keys prefixed "category:" go to the override map).
    static SeverityWeights parse(const std::string &text);
};

struct LoadResult {
    std::vector<EvaluationInstance> instances; // sorted by key
    std::vector<std::string> warnings;
    long skipped = 0;
};

/// SummEval aligned-annotation JSONL: {id, model_id, decoded, references?, text,
/// expert_annotations:[{coherence,...}], turker_annotations:[...]}. One instance per
/// (article, system); human scores are the annotator mean per dimension.
LoadResult load_summeval(const DatasetManifest &manifest);

/// QAGS JSONL: {article, summary_sentences:[{sentence, responses:[{response:"yes"|"no"}]}]}.
/// factuality = mean over sentences of the fraction of "yes" responses.
LoadResult load_qags(const DatasetManifest &manifest);

/// WMT MQM TSV with a header naming at least system, seg_id, rater, source, target,
/// category, severity (an optional reference column feeds the baselines). mqm = per-rater penalty sum, averaged over raters.
/// Throws UnknownSeverity; segments lacking a system seen elsewhere are skipped
/// with a warning (MissingSystemOutput) unless `strict`.
LoadResult load_mqm(const DatasetManifest &manifest, const SeverityWeights &weights = {}, bool strict = false);

/// Dispatches on manifest.format.
LoadResult load_dataset(const DatasetManifest &manifest, const SeverityWeights &weights = {});

struct TokenProbLoad {
    std::map<InstanceKey, AlignedPair> pairs;
    std::map<InstanceKey, TokenProbSequence> experts; // every expert record, paired or not
    std::vector<std::pair<InstanceKey, Error>> failures; // per-key problems (lenient mode)
};

/// Reads interchange files and pairs expert/amateur records per instance.
/// Strict mode throws DuplicateRecord, MissingRole or the alignment error of the
/// first bad key; lenient mode records them in `failures` and keeps going.
TokenProbLoad load_tokenprobs(const std::vector<std::filesystem::path> &paths, bool strict = true);

} // namespace contrastscore
