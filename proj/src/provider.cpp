#include "contrastscore/provider.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/interchange.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <thread>

namespace contrastscore {

using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Uniform draws built directly on mt19937_64 output so streams are identical across
/// standard libraries (std::*_distribution is implementation-defined).
class MockRng {
  public:
    explicit MockRng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    std::int64_t token(std::int64_t vocab) { return static_cast<std::int64_t>(engine_() % static_cast<std::uint64_t>(vocab)); }

  private:
    std::mt19937_64 engine_;
};

constexpr std::int64_t kMockVocab = 50000;

AlignedPair mock_pair(std::uint64_t seed, const std::vector<std::int64_t> &ids, const std::vector<std::string> &texts,
                      double roughness, int top_k, InstanceKey key) {
    MockRng rng(seed);
    TokenProbSequence expert, amateur;
    expert.model_id = "mock-expert";
    amateur.model_id = "mock-amateur";
    expert.role = Role::expert;
    amateur.role = Role::amateur;
    expert.temperature = 0.5;
    amateur.temperature = 1.5;
    expert.tokenizer_id = amateur.tokenizer_id = "mock-whitespace";
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const double pe = 0.001 + 0.999 * rng.uniform() * rng.uniform();
        const double z = rng.normal();
        // roughness 0 multiplies by exactly 1.0
        const double pa = std::min(1.0, pe * std::exp(3.0 * roughness * z));
        TokenProb e{ids[t], texts[t], pe, {}};
        if (top_k > 0) {
            const bool in_head = rng.uniform() < std::pow(pe, 0.25);
            for (int k = 0; k < top_k; ++k) e.top_k.push_back(kMockVocab + rng.token(kMockVocab));
            if (in_head) {
                const auto slot = std::min<std::size_t>(static_cast<std::size_t>((1.0 - pe) * top_k),
                                                        static_cast<std::size_t>(top_k - 1));
                e.top_k[slot] = ids[t];
            }
        }
        amateur.tokens.push_back({ids[t], texts[t], pa, {}});
        expert.tokens.push_back(std::move(e));
    }
    return validate_alignment(std::move(expert), std::move(amateur), std::move(key));
}

std::vector<std::string> whitespace_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) words.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return words;
}

class MockProvider final : public Provider {
  public:
    explicit MockProvider(ProviderConfig config) : config_(std::move(config)) {}

    TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &) override {
        auto words = whitespace_words(instance.hypothesis);
        if (words.empty()) throw Error(ErrorKind::InvalidValue, "empty hypothesis for " + instance.key.str());
        std::vector<std::int64_t> ids;
        for (const auto &w : words) ids.push_back(static_cast<std::int64_t>(fnv1a(w) % kMockVocab));
        const auto pair = mock_pair(config_.mock_seed ^ fnv1a(instance.key.str()), ids, words, config_.mock_roughness,
                                    config_.top_k_capture.value_or(0), instance.key);
        auto seq = config_.role == Role::expert ? pair.expert() : pair.amateur();
        seq.model_id = config_.model_id;
        seq.temperature = config_.temperature;
        return seq;
    }

  private:
    ProviderConfig config_;
};

class FileProvider final : public Provider {
  public:
    explicit FileProvider(const ProviderConfig &config) : role_(config.role) {
        for (const auto &path : config.files)
            for (auto &rec : read_records(path)) {
                const auto key = std::pair{rec.key, rec.sequence.role};
                if (std::find_if(records_.begin(), records_.end(), [&](const auto &r) { return r.first == key; }) !=
                    records_.end())
                    throw Error(ErrorKind::DuplicateRecord, rec.key.str() + " / " + std::string(to_string(key.second)));
                records_.emplace_back(key, std::move(rec.sequence));
            }
    }

    TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &) override {
        for (const auto &[key, seq] : records_)
            if (key.first == instance.key && key.second == role_) return seq;
        throw Error(ErrorKind::MissingRole,
                    instance.key.str() + " has no " + std::string(to_string(role_)) + " record in the input files");
    }

  private:
    Role role_;
    std::vector<std::pair<std::pair<InstanceKey, Role>, TokenProbSequence>> records_;
};

struct ParsedUrl {
    std::string base; // scheme://host:port
    std::string path;
};

ParsedUrl parse_url(const std::string &url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::Config, "endpoint must be an http:// URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/score"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpProvider final : public Provider {
  public:
    explicit HttpProvider(ProviderConfig config) : config_(std::move(config)), url_(parse_url(*config_.endpoint)) {
        if (const char *key = std::getenv(kCredentialsEnv)) credentials_ = key;
    }

    TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &prompt) override {
        const auto prompt_text = render_prompt(prompt, instance);
        const auto cache_key =
            sha256_hex(instance.key.str() + "\n" + config_.model_id + "\n" + format_double(config_.temperature) + "\n" +
                       prompt.hash() + "\n" + std::to_string(config_.top_k_capture.value_or(0)));
        TokenProbSequence seq;
        if (auto hit = lookup(cache_key)) {
            seq = std::move(*hit);
        } else {
            seq = request(instance, prompt_text);
            store(cache_key, instance.key, seq);
        }
        check_drift(instance.key, seq);
        return seq;
    }

    long requests() const override { return requests_.load(); }

  private:
    std::optional<TokenProbSequence> lookup(const std::string &cache_key) {
        {
            std::lock_guard lock(mutex_);
            if (const auto it = memory_.find(cache_key); it != memory_.end()) return it->second;
        }
        if (config_.cache_dir.empty()) return std::nullopt;
        const auto path = config_.cache_dir / (cache_key + ".json");
        if (!std::filesystem::exists(path)) return std::nullopt;
        auto rec = decode_record(read_file(path), path.string() + ": ");
        std::lock_guard lock(mutex_);
        memory_[cache_key] = rec.sequence;
        return rec.sequence;
    }

    void store(const std::string &cache_key, const InstanceKey &key, const TokenProbSequence &seq) {
        if (!config_.cache_dir.empty())
            write_file_atomic(config_.cache_dir / (cache_key + ".json"), encode_record({key, seq}) + "\n");
        std::lock_guard lock(mutex_);
        memory_[cache_key] = seq;
    }

    // The first tokenization seen for an instance is recorded; any later role that
    // disagrees means the backend tokenizes differently and alignment would break.
    void check_drift(const InstanceKey &key, const TokenProbSequence &seq) {
        json ids = json::array();
        for (const auto &t : seq.tokens) ids.push_back(t.token_id);
        const std::string fingerprint = ids.dump();
        const auto name = sha256_hex(key.str());
        std::lock_guard lock(mutex_);
        std::string previous;
        if (const auto it = tokenizations_.find(name); it != tokenizations_.end()) {
            previous = it->second;
        } else if (!config_.cache_dir.empty()) {
            const auto path = config_.cache_dir / "tokenizations" / (name + ".json");
            if (std::filesystem::exists(path)) previous = read_file(path);
        }
        if (previous.empty()) {
            tokenizations_[name] = fingerprint;
            if (!config_.cache_dir.empty())
                write_file_atomic(config_.cache_dir / "tokenizations" / (name + ".json"), fingerprint);
            return;
        }
        if (previous != fingerprint)
            throw Error(ErrorKind::TokenizationDrift,
                        key.str() + ": backend token ids differ from those cached for another role");
        tokenizations_[name] = fingerprint;
    }

    TokenProbSequence request(const EvaluationInstance &instance, const std::string &prompt_text) {
        json body = {{"model", config_.model_id},
                     {"prompt", prompt_text},
                     {"continuation", instance.hypothesis},
                     {"temperature", config_.temperature}};
        body["top_k"] = config_.top_k_capture ? json(*config_.top_k_capture) : json(nullptr);
        const auto payload = body.dump();

        httplib::Headers headers;
        if (!credentials_.empty()) headers.emplace("Authorization", "Bearer " + credentials_);

        std::string last_problem;
        bool timed_out = false;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
            httplib::Client client(url_.base);
            const auto seconds = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
            client.set_connection_timeout(seconds);
            client.set_read_timeout(seconds);
            client.set_write_timeout(seconds);
            ++requests_;
            const auto res = client.Post(url_.path, headers, payload, "application/json");
            if (!res) {
                const auto err = res.error();
                timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
                last_problem = httplib::to_string(err);
                continue;
            }
            timed_out = false;
            if (res->status >= 500 || res->status == 429) {
                last_problem = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
                continue;
            }
            if (res->status != 200)
                throw Error(ErrorKind::BackendError,
                            "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
            return parse_response(instance, res->body);
        }
        if (timed_out) throw Error(ErrorKind::Timeout, instance.key.str() + ": " + last_problem);
        throw Error(ErrorKind::BackendError, instance.key.str() + ": " + last_problem);
    }

    TokenProbSequence parse_response(const EvaluationInstance &instance, const std::string &body) {
        TokenProbSequence seq;
        seq.model_id = config_.model_id;
        seq.role = config_.role;
        seq.temperature = config_.temperature;
        try {
            const auto doc = json::parse(body);
            seq.tokenizer_id = doc.value("tokenizer_id", config_.model_id);
            for (const auto &t : doc.at("tokens")) {
                TokenProb tok;
                tok.token_id = t.at("token_id").get<std::int64_t>();
                tok.text = t.at("text").get<std::string>();
                tok.prob = std::clamp(std::exp(t.at("logprob").get<double>()), 0.0, 1.0);
                if (t.contains("top_k") && !t.at("top_k").is_null())
                    tok.top_k = t.at("top_k").get<std::vector<std::int64_t>>();
                seq.tokens.push_back(std::move(tok));
            }
        } catch (const json::exception &e) {
            throw Error(ErrorKind::BackendError, instance.key.str() + ": unparseable response: " + e.what() + ": " +
                                                     body.substr(0, 200));
        }
        validate(seq);
        return seq;
    }

    ProviderConfig config_;
    ParsedUrl url_;
    std::string credentials_;
    std::mutex mutex_;
    std::map<std::string, TokenProbSequence> memory_;
    std::map<std::string, std::string> tokenizations_;
    std::atomic<long> requests_{0};
};

} // namespace

void validate(const ProviderConfig &config) {
    if (config.endpoint.has_value() != (config.kind == ProviderKind::http))
        throw Error(ErrorKind::Config, "endpoint must be set for the http provider and only for it");
    if (!(config.temperature > 0.0) || !std::isfinite(config.temperature))
        throw Error(ErrorKind::Config, "temperature must be positive");
    if (config.top_k_capture && *config.top_k_capture <= 0) throw Error(ErrorKind::Config, "top_k_capture must be positive");
    if (config.max_retries < 0 || config.max_in_flight < 1) throw Error(ErrorKind::Config, "bad retry / in-flight limits");
    if (config.kind == ProviderKind::file && config.files.empty())
        throw Error(ErrorKind::Config, "file provider needs at least one interchange file");
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::InvalidValue, "SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string PromptTemplate::hash() const { return sha256_hex(id + "\n" + text + "\n" + target_language); }

PromptTemplate translation_prompt(const std::string &target_language) {
    return {"translation-v1", "Translate the following sentence to {target_language}: {source}\n", target_language};
}

PromptTemplate summarization_prompt() {
    return {"summarization-v1",
            "Write an accurate, relevant, and coherent summary of the following texts:\n{source}\nSummary:\n",
            "English"};
}

std::string language_name(const std::string &code) {
    static const std::map<std::string, std::string> names{{"en", "English"}, {"de", "German"},  {"ru", "Russian"},
                                                          {"zh", "Chinese"}, {"he", "Hebrew"},  {"fr", "French"},
                                                          {"ja", "Japanese"}, {"cs", "Czech"}, {"uk", "Ukrainian"}};
    const auto it = names.find(code);
    return it == names.end() ? code : it->second;
}

std::string render_prompt(const PromptTemplate &tmpl, const EvaluationInstance &instance) {
    std::string out;
    std::string_view text = tmpl.text;
    while (!text.empty()) {
        const auto open = text.find('{');
        if (open == std::string_view::npos) {
            out += text;
            break;
        }
        out += text.substr(0, open);
        const auto close = text.find('}', open);
        if (close == std::string_view::npos) {
            out += text.substr(open);
            break;
        }
        const auto name = text.substr(open + 1, close - open - 1);
        if (name == "source") out += instance.source;
        else if (name == "target_language") out += tmpl.target_language;
        else out += text.substr(open, close - open + 1);
        text.remove_prefix(close + 1);
    }
    return out;
}

AlignedPair mock_generate(std::uint64_t seed, std::size_t length, double roughness, int top_k) {
    MockRng ids_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::int64_t> ids;
    std::vector<std::string> texts;
    for (std::size_t t = 0; t < length; ++t) {
        ids.push_back(ids_rng.token(kMockVocab));
        texts.push_back("tok" + std::to_string(ids.back()));
    }
    return mock_pair(seed, ids, texts, roughness, top_k, {"mock", std::to_string(seed), "mock"});
}

std::unique_ptr<Provider> make_provider(const ProviderConfig &config) {
    validate(config);
    switch (config.kind) {
    case ProviderKind::mock: return std::make_unique<MockProvider>(config);
    case ProviderKind::file: return std::make_unique<FileProvider>(config);
    case ProviderKind::http: return std::make_unique<HttpProvider>(config);
    }
    throw Error(ErrorKind::Config, "unknown provider kind");
}

TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &prompt, const ProviderConfig &config) {
    return make_provider(config)->fetch(instance, prompt);
}

std::vector<TokenProbRecord> fetch_all(Provider &provider, const std::vector<EvaluationInstance> &instances,
                                       const std::vector<PromptTemplate> &prompts, int max_in_flight) {
    if (prompts.size() != 1 && prompts.size() != instances.size())
        throw Error(ErrorKind::Config, "need one prompt template or one per instance");
    std::vector<std::optional<TokenProbRecord>> results(instances.size());
    std::vector<std::optional<Error>> errors(instances.size());
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> workers;
        const auto n = std::max(1, std::min<int>(max_in_flight, static_cast<int>(instances.size())));
        for (int w = 0; w < n; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < instances.size(); i = next++) {
                    try {
                        const auto &prompt = prompts.size() == 1 ? prompts.front() : prompts[i];
                        results[i] = TokenProbRecord{instances[i].key, provider.fetch(instances[i], prompt)};
                    } catch (const Error &e) {
                        errors[i] = e;
                    }
                }
            });
    }
    for (const auto &e : errors)
        if (e) throw *e;
    std::vector<TokenProbRecord> out;
    out.reserve(results.size());
    for (auto &r : results) out.push_back(std::move(*r));
    return out;
}

} // namespace contrastscore
