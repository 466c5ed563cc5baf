#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace contrastscore {

/// Orders strings so that embedded digit runs compare numerically ("seg2" < "seg10").
bool natural_less(std::string_view a, std::string_view b);

struct InstanceKey {
    std::string dataset_id;
    std::string segment_id;
    std::string system_id;

    bool operator==(const InstanceKey &) const = default;
    std::string str() const; // "dataset/segment/system"
};

/// Dataset, then segment, then system, each in natural order.
bool operator<(const InstanceKey &a, const InstanceKey &b);

/// Inverse of InstanceKey::str(); throws Config on a malformed key.
InstanceKey parse_instance_key(std::string_view text);

enum class Role { expert, amateur };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct TokenProb {
    std::int64_t token_id = 0;
    std::string text;
    double prob = 0.0; // P(token | prefix, source, prompt), linear domain
    /// Expert top-k candidate ids at this position, most likely first. Empty when not captured.
    std::vector<std::int64_t> top_k;

    bool operator==(const TokenProb &) const = default;
};

struct TokenProbSequence {
    std::string model_id;
    Role role = Role::expert;
    double temperature = 1.0;
    std::vector<TokenProb> tokens;
    std::string tokenizer_id;

    bool operator==(const TokenProbSequence &) const = default;

    std::size_t size() const noexcept { return tokens.size(); }
    bool has_top_k() const noexcept;
};

/// Throws InvalidValue unless: tokens non-empty, every prob finite and in [0,1],
/// token_id >= 0, temperature > 0.
void validate(const TokenProbSequence &seq);

/// One line of the token-probability interchange format.
struct TokenProbRecord {
    InstanceKey key;
    TokenProbSequence sequence;

    bool operator==(const TokenProbRecord &) const = default;
};

/// Expert and amateur streams for one instance, checked position by position.
/// Only validate_alignment() can build one, so every instance is valid.
class AlignedPair {
  public:
    const TokenProbSequence &expert() const noexcept { return expert_; }
    const TokenProbSequence &amateur() const noexcept { return amateur_; }
    const InstanceKey &key() const noexcept { return key_; }
    std::size_t size() const noexcept { return expert_.tokens.size(); }

    bool operator==(const AlignedPair &) const = default;

  private:
    AlignedPair(TokenProbSequence expert, TokenProbSequence amateur, InstanceKey key)
        : expert_(std::move(expert)), amateur_(std::move(amateur)), key_(std::move(key)) {}

    friend AlignedPair validate_alignment(TokenProbSequence expert, TokenProbSequence amateur,
                                          InstanceKey key);

    TokenProbSequence expert_;
    TokenProbSequence amateur_;
    InstanceKey key_;
};

/// Throws InvalidValue, TokenizerMismatch, LengthMismatch or TokenMismatch (the message
/// names the first diverging position).
AlignedPair validate_alignment(TokenProbSequence expert, TokenProbSequence amateur,
                               InstanceKey key = {});

struct EvaluationInstance {
    InstanceKey key;
    std::string source;
    std::string hypothesis;
    std::optional<std::vector<std::string>> references;
    std::map<std::string, double> human_scores; // dimension -> score
};

/// Throws InvalidValue on an empty hypothesis or a non-finite human score.
void validate(const EvaluationInstance &instance);

enum class ScorerKind { single, ensemble_avg, ensemble_weighted, contrast, cd_score, division };
enum class Weighting { mean, sum };
enum class LogBase { natural, ten };

std::string_view to_string(ScorerKind kind);
std::string_view to_string(Weighting weighting);
std::string_view to_string(LogBase base);

struct ScorerSpec {
    ScorerKind kind = ScorerKind::contrast;
    double gamma = 0.1;
    Weighting weighting = Weighting::mean;
    LogBase log_base = LogBase::ten;
    double prob_floor = 1e-10;
    std::optional<int> top_k;         // cd_score only
    Role role = Role::expert;         // which stream `single` reads
    std::optional<double> cd_sentinel; // natural-log penalty outside V_head; default log(prob_floor)
    std::string id;                   // column label; canonical string when empty

    bool operator==(const ScorerSpec &) const = default;

    /// Label used in score tables.
    std::string scorer_id() const;
    /// Fully spelled-out, parseable form.
    std::string canonical() const;
};

/// Throws Config unless gamma in [0,1], prob_floor > 0, and top_k is set iff kind is cd_score.
void validate(const ScorerSpec &spec);

/// Parses "contrast:gamma=0.1:weighting=mean:base=10" style strings. Keys:
/// gamma, weighting (mean|sum), base (10|e|ten|natural), floor, top_k, role, sentinel, id.
ScorerSpec parse_scorer_spec(std::string_view text);

/// Scores keyed by (instance, scorer). Every stored score is finite.
class ScoreTable {
  public:
    using Key = std::pair<InstanceKey, std::string>;

    void set(const InstanceKey &key, const std::string &scorer_id, double score);
    std::optional<double> get(const InstanceKey &key, const std::string &scorer_id) const;
    std::vector<std::string> scorer_ids() const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    void merge(const ScoreTable &other);

    struct KeyLess {
        bool operator()(const Key &a, const Key &b) const {
            if (a.first < b.first) return true;
            if (b.first < a.first) return false;
            return a.second < b.second;
        }
    };
    const std::map<Key, double, KeyLess> &entries() const noexcept { return entries_; }

  private:
    std::map<Key, double, KeyLess> entries_;
};

} // namespace contrastscore
