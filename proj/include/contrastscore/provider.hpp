#pragma once

#include "contrastscore/types.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace contrastscore {

enum class ProviderKind { file, http, mock };

/// Environment variable holding the bearer token for the http provider.
inline constexpr const char *kCredentialsEnv = "CONTRASTSCORE_API_KEY";

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::optional<std::string> endpoint; // http only, e.g. http://127.0.0.1:8080/score
    std::string model_id = "mock-expert";
    Role role = Role::expert;
    double temperature = 1.0;
    std::optional<int> top_k_capture;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{200}; // doubled per retry
    int max_in_flight = 4;
    std::filesystem::path cache_dir; // empty: in-memory cache only
    std::vector<std::filesystem::path> files; // file provider inputs
    std::uint64_t mock_seed = 7;
    double mock_roughness = 0.3;
};

/// Throws Config unless endpoint is present iff kind is http and temperature > 0.
void validate(const ProviderConfig &config);

struct PromptTemplate {
    std::string id;
    std::string text; // placeholders: {source}, {target_language}
    std::string target_language = "English";

    std::string hash() const; // SHA-256 hex of id, text and target language
};

/// Translation prompt: "Translate the following sentence to {target_language}: {source}\n".
PromptTemplate translation_prompt(const std::string &target_language = "English");
/// Summarization prompt: "Write an accurate, relevant, and coherent summary of the following texts:\n{source}\nSummary:\n".
PromptTemplate summarization_prompt();

/// English name for an ISO code ("de" -> "German"); unknown codes are returned unchanged.
std::string language_name(const std::string &code);

std::string render_prompt(const PromptTemplate &tmpl, const EvaluationInstance &instance);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Reproducible aligned pair whose amateur stream drifts from the expert as `roughness`
/// grows (roughness 0 gives identical streams). top_k > 0 also fills expert top-k sets.
AlignedPair mock_generate(std::uint64_t seed, std::size_t length, double roughness, int top_k = 0);

class Provider {
  public:
    virtual ~Provider() = default;
    virtual TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &prompt) = 0;
    /// Network round trips made so far (http only).
    virtual long requests() const { return 0; }
};

std::unique_ptr<Provider> make_provider(const ProviderConfig &config);

/// Convenience one-shot form.
TokenProbSequence fetch(const EvaluationInstance &instance, const PromptTemplate &prompt, const ProviderConfig &config);

/// Fetches every instance with at most config.max_in_flight concurrent requests.
/// `prompts` holds one template for all instances or one per instance. Results come
/// back in input order; the first failure is rethrown after all workers stop.
std::vector<TokenProbRecord> fetch_all(Provider &provider, const std::vector<EvaluationInstance> &instances,
                                       const std::vector<PromptTemplate> &prompts, int max_in_flight);

} // namespace contrastscore
