#include "contrastscore/types.hpp"

#include "contrastscore/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <sstream>

namespace contrastscore {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TokenMismatch: return "TokenMismatch";
    case ErrorKind::TokenizerMismatch: return "TokenizerMismatch";
    case ErrorKind::MissingTopK: return "MissingTopK";
    case ErrorKind::WrongScorerKind: return "WrongScorerKind";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::NoComparablePairs: return "NoComparablePairs";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::UnknownSeverity: return "UnknownSeverity";
    case ErrorKind::MissingSystemOutput: return "MissingSystemOutput";
    case ErrorKind::DuplicateRecord: return "DuplicateRecord";
    case ErrorKind::MissingRole: return "MissingRole";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::TokenizationDrift: return "TokenizationDrift";
    case ErrorKind::InsufficientWorkload: return "InsufficientWorkload";
    case ErrorKind::UnknownInstance: return "UnknownInstance";
    case ErrorKind::Config: return "ConfigError";
    }
    return "Unknown";
}

bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
            // strip leading zeros, then compare by length and digits
            auto strip = [](std::string_view s) {
                const auto p = s.find_first_not_of('0');
                return p == std::string_view::npos ? std::string_view{} : s.substr(p);
            };
            auto sa = strip(na), sb = strip(nb);
            if (sa.size() != sb.size()) return sa.size() < sb.size();
            if (sa != sb) return sa < sb;
            if (na.size() != nb.size()) return na.size() < nb.size();
            i = ie;
            j = je;
            continue;
        }
        if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
        ++i;
        ++j;
    }
    return (a.size() - i) < (b.size() - j);
}

std::string InstanceKey::str() const { return dataset_id + "/" + segment_id + "/" + system_id; }

bool operator<(const InstanceKey &a, const InstanceKey &b) {
    if (a.dataset_id != b.dataset_id) return natural_less(a.dataset_id, b.dataset_id);
    if (a.segment_id != b.segment_id) return natural_less(a.segment_id, b.segment_id);
    if (a.system_id != b.system_id) return natural_less(a.system_id, b.system_id);
    return false;
}

InstanceKey parse_instance_key(std::string_view text) {
    const auto first = text.find('/');
    const auto last = text.rfind('/');
    if (first == std::string_view::npos || first == last)
        throw Error(ErrorKind::Config, "instance key must look like dataset/segment/system: " +
                                           std::string(text));
    return {std::string(text.substr(0, first)), std::string(text.substr(first + 1, last - first - 1)),
            std::string(text.substr(last + 1))};
}

std::string_view to_string(Role role) { return role == Role::expert ? "expert" : "amateur"; }

Role parse_role(std::string_view text) {
    if (text == "expert") return Role::expert;
    if (text == "amateur") return Role::amateur;
    throw Error(ErrorKind::InvalidValue, "unknown role '" + std::string(text) + "'");
}

bool TokenProbSequence::has_top_k() const noexcept {
    return !tokens.empty() &&
           std::all_of(tokens.begin(), tokens.end(), [](const TokenProb &t) { return !t.top_k.empty(); });
}

void validate(const TokenProbSequence &seq) {
    if (seq.tokens.empty()) throw Error(ErrorKind::InvalidValue, "token sequence is empty");
    if (!(seq.temperature > 0.0) || !std::isfinite(seq.temperature))
        throw Error(ErrorKind::InvalidValue, "temperature must be positive");
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
        const auto &tok = seq.tokens[t];
        if (!std::isfinite(tok.prob) || tok.prob < 0.0 || tok.prob > 1.0)
            throw Error(ErrorKind::InvalidValue,
                        "probability at position " + std::to_string(t) + " outside [0,1]");
        if (tok.token_id < 0)
            throw Error(ErrorKind::InvalidValue, "negative token_id at position " + std::to_string(t));
    }
}

AlignedPair validate_alignment(TokenProbSequence expert, TokenProbSequence amateur, InstanceKey key) {
    validate(expert);
    validate(amateur);
    if (expert.tokenizer_id != amateur.tokenizer_id)
        throw Error(ErrorKind::TokenizerMismatch,
                    "expert '" + expert.tokenizer_id + "' vs amateur '" + amateur.tokenizer_id + "'");
    if (expert.tokens.size() != amateur.tokens.size())
        throw Error(ErrorKind::LengthMismatch, std::to_string(expert.tokens.size()) + " vs " +
                                                   std::to_string(amateur.tokens.size()) + " tokens");
    for (std::size_t t = 0; t < expert.tokens.size(); ++t) {
        if (expert.tokens[t].token_id != amateur.tokens[t].token_id)
            throw Error(ErrorKind::TokenMismatch, "position " + std::to_string(t) + ": " +
                                                      std::to_string(expert.tokens[t].token_id) + " vs " +
                                                      std::to_string(amateur.tokens[t].token_id));
    }
    return AlignedPair(std::move(expert), std::move(amateur), std::move(key));
}

void validate(const EvaluationInstance &instance) {
    if (instance.hypothesis.empty())
        throw Error(ErrorKind::InvalidValue, "empty hypothesis for " + instance.key.str());
    for (const auto &[dim, value] : instance.human_scores)
        if (!std::isfinite(value))
            throw Error(ErrorKind::InvalidValue, "non-finite human score '" + dim + "' for " + instance.key.str());
}

std::string_view to_string(ScorerKind kind) {
    switch (kind) {
    case ScorerKind::single: return "single";
    case ScorerKind::ensemble_avg: return "ensemble_avg";
    case ScorerKind::ensemble_weighted: return "ensemble_weighted";
    case ScorerKind::contrast: return "contrast";
    case ScorerKind::cd_score: return "cd_score";
    case ScorerKind::division: return "division";
    }
    return "?";
}

std::string_view to_string(Weighting weighting) { return weighting == Weighting::mean ? "mean" : "sum"; }
std::string_view to_string(LogBase base) { return base == LogBase::ten ? "10" : "e"; }

namespace {

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    // prefer the short form when it round-trips
    for (int p = 1; p <= 17; ++p) {
        std::ostringstream s;
        s.precision(p);
        s << v;
        if (std::stod(s.str()) == v) return s.str();
    }
    return os.str();
}

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    const auto *end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw Error(ErrorKind::Config, "scorer option '" + std::string(key) + "' expects a number, got '" +
                                           std::string(text) + "'");
    return v;
}

ScorerKind parse_kind(std::string_view text) {
    if (text == "single") return ScorerKind::single;
    if (text == "ensemble_avg" || text == "ensemble") return ScorerKind::ensemble_avg;
    if (text == "ensemble_weighted" || text == "weighted") return ScorerKind::ensemble_weighted;
    if (text == "contrast") return ScorerKind::contrast;
    if (text == "cd_score" || text == "cd") return ScorerKind::cd_score;
    if (text == "division") return ScorerKind::division;
    throw Error(ErrorKind::Config, "unknown scorer kind '" + std::string(text) + "'");
}

} // namespace

std::string ScorerSpec::canonical() const {
    std::string out(to_string(kind));
    if (kind == ScorerKind::single) out += ":role=" + std::string(to_string(role));
    if (kind == ScorerKind::contrast || kind == ScorerKind::ensemble_weighted)
        out += ":gamma=" + format_number(gamma);
    out += ":weighting=" + std::string(to_string(weighting));
    out += ":base=" + std::string(to_string(log_base));
    out += ":floor=" + format_number(prob_floor);
    if (top_k) out += ":top_k=" + std::to_string(*top_k);
    if (cd_sentinel) out += ":sentinel=" + format_number(*cd_sentinel);
    return out;
}

std::string ScorerSpec::scorer_id() const { return id.empty() ? canonical() : id; }

void validate(const ScorerSpec &spec) {
    if (!(spec.gamma >= 0.0 && spec.gamma <= 1.0))
        throw Error(ErrorKind::Config, "gamma must lie in [0,1]");
    if (!(spec.prob_floor > 0.0) || !std::isfinite(spec.prob_floor))
        throw Error(ErrorKind::Config, "prob_floor must be positive");
    if (spec.top_k.has_value() != (spec.kind == ScorerKind::cd_score))
        throw Error(ErrorKind::Config, "top_k must be set for cd_score and only for cd_score");
    if (spec.top_k && *spec.top_k <= 0) throw Error(ErrorKind::Config, "top_k must be positive");
    if (spec.cd_sentinel && !std::isfinite(*spec.cd_sentinel))
        throw Error(ErrorKind::Config, "cd sentinel must be finite");
}

ScorerSpec parse_scorer_spec(std::string_view text) {
    ScorerSpec spec;
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = text.find(':', start);
        parts.push_back(text.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    spec.kind = parse_kind(parts.front());
    if (spec.kind == ScorerKind::ensemble_avg) spec.gamma = 0.5;
    if (spec.kind == ScorerKind::ensemble_weighted) spec.gamma = 0.5;
    if (spec.kind == ScorerKind::cd_score) spec.top_k = 10;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::Config, "scorer option '" + std::string(parts[i]) + "' must be key=value");
        const auto key = parts[i].substr(0, eq);
        const auto value = parts[i].substr(eq + 1);
        if (key == "gamma") {
            spec.gamma = parse_number(key, value);
        } else if (key == "weighting") {
            if (value == "mean") spec.weighting = Weighting::mean;
            else if (value == "sum") spec.weighting = Weighting::sum;
            else throw Error(ErrorKind::Config, "weighting must be mean or sum");
        } else if (key == "base") {
            if (value == "10" || value == "ten") spec.log_base = LogBase::ten;
            else if (value == "e" || value == "natural") spec.log_base = LogBase::natural;
            else throw Error(ErrorKind::Config, "base must be 10 or e");
        } else if (key == "floor") {
            spec.prob_floor = parse_number(key, value);
        } else if (key == "top_k") {
            spec.top_k = static_cast<int>(parse_number(key, value));
        } else if (key == "role") {
            try {
                spec.role = parse_role(value);
            } catch (const Error &) {
                throw Error(ErrorKind::Config, "role must be expert or amateur");
            }
        } else if (key == "sentinel") {
            spec.cd_sentinel = parse_number(key, value);
        } else if (key == "id") {
            spec.id = std::string(value);
        } else {
            throw Error(ErrorKind::Config, "unknown scorer option '" + std::string(key) + "'");
        }
    }
    if (spec.kind == ScorerKind::ensemble_avg && spec.gamma != 0.5)
        throw Error(ErrorKind::Config, "ensemble_avg has gamma fixed at 0.5; use ensemble_weighted");
    validate(spec);
    return spec;
}

void ScoreTable::set(const InstanceKey &key, const std::string &scorer_id, double score) {
    if (!std::isfinite(score))
        throw Error(ErrorKind::InvalidValue, "non-finite score for " + key.str() + " / " + scorer_id);
    entries_[{key, scorer_id}] = score;
}

std::optional<double> ScoreTable::get(const InstanceKey &key, const std::string &scorer_id) const {
    const auto it = entries_.find({key, scorer_id});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> ScoreTable::scorer_ids() const {
    std::vector<std::string> ids;
    for (const auto &[k, v] : entries_) ids.push_back(k.second);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void ScoreTable::merge(const ScoreTable &other) {
    for (const auto &[k, v] : other.entries_) entries_[k] = v;
}

} // namespace contrastscore
