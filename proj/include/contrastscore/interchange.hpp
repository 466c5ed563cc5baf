#pragma once

#include "contrastscore/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace contrastscore {

/// Version stamped into every structured output line we write.
inline constexpr int kSchemaVersion = 1;

// Token-probability interchange: one JSON object per line,
// {dataset_id, segment_id, system_id, model_id, role, temperature, tokenizer_id,
//  tokens:[{token_id, text, prob[, top_k]}]}.

std::string encode_record(const TokenProbRecord &record);

/// Throws MalformedRecord (missing field, wrong type, bad JSON) or InvalidValue
/// (sequence invariants). `where` is prefixed to messages.
TokenProbRecord decode_record(std::string_view line, std::string_view where = {});

std::vector<TokenProbRecord> read_records(const std::filesystem::path &path);
void write_records(const std::filesystem::path &path, const std::vector<TokenProbRecord> &records);

// Score lines: {schema_version?, dataset_id, segment_id, system_id, scorer_id, score}.
// External metric files (COMET and friends) use the same shape without schema_version.

std::string encode_score_line(const InstanceKey &key, const std::string &scorer_id, double score);
void write_score_table(std::ostream &out, const ScoreTable &table);
ScoreTable read_score_file(const std::filesystem::path &path);

/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view content);
std::string read_file(const std::filesystem::path &path);

/// Removes a UTF-8 byte-order mark, if present.
std::string_view strip_bom(std::string_view text);

} // namespace contrastscore
