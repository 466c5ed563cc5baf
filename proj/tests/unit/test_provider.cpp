#include "support.hpp"

#include "contrastscore/error.hpp"
#include "contrastscore/provider.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <thread>

using namespace contrastscore;
using testing::TempDir;

namespace {

EvaluationInstance instance(const std::string &seg, const std::string &hyp) {
    EvaluationInstance i;
    i.key = {"d", seg, "sys"};
    i.source = "Quelle " + seg;
    i.hypothesis = hyp;
    return i;
}

/// Local scoring backend: one token per whitespace word, logprob log(0.5) for the
/// expert model and log(0.25) otherwise. Behaviour is switched through the fields.
struct FakeBackend {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::atomic<int> fail_first{0};       // answer 503 this many times
    std::atomic<int> status_override{0};  // fixed status for every call
    std::atomic<int> delay_ms{0};
    std::atomic<bool> drift_for_amateur{false};
    std::string last_auth;
    std::string last_prompt;
    std::mutex mutex;

    FakeBackend() {
        server.Post("/score", [this](const httplib::Request &req, httplib::Response &res) {
            const int n = ++hits;
            {
                std::lock_guard lock(mutex);
                last_auth = req.get_header_value("Authorization");
            }
            if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
            if (status_override) {
                res.status = status_override;
                res.set_content("nope", "text/plain");
                return;
            }
            if (n <= fail_first) {
                res.status = 503;
                res.set_content("busy", "text/plain");
                return;
            }
            const auto body = nlohmann::json::parse(req.body);
            {
                std::lock_guard lock(mutex);
                last_prompt = body["prompt"];
            }
            const bool expert = body["model"] == "big";
            nlohmann::json tokens = nlohmann::json::array();
            std::istringstream words(body["continuation"].get<std::string>());
            std::string w;
            int id = 10;
            while (words >> w) {
                nlohmann::json t{{"token_id", id++}, {"text", w}, {"logprob", std::log(expert ? 0.5 : 0.25)}};
                if (!expert && drift_for_amateur) t["token_id"] = id + 1000;
                if (!body["top_k"].is_null()) t["top_k"] = {id - 1, 3, 4};
                tokens.push_back(t);
            }
            res.set_content(nlohmann::json{{"tokenizer_id", "fake"}, {"tokens", tokens}}.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeBackend() {
        server.stop();
        thread.join();
    }

    ProviderConfig config(const std::string &model, Role role) const {
        ProviderConfig c;
        c.kind = ProviderKind::http;
        c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/score";
        c.model_id = model;
        c.role = role;
        c.temperature = role == Role::expert ? 0.5 : 1.5;
        c.backoff = std::chrono::milliseconds(1);
        c.timeout = std::chrono::milliseconds(2000);
        return c;
    }
};

} // namespace

TEST_CASE("sha256 of a known vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("prompt templates render the source and target language") {
    const auto inst = instance("1", "h");
    CHECK(render_prompt(translation_prompt(language_name("de")), inst) ==
          "Translate the following sentence to German: Quelle 1\n");
    CHECK(render_prompt(summarization_prompt(), inst) ==
          "Write an accurate, relevant, and coherent summary of the following texts:\nQuelle 1\nSummary:\n");
    CHECK(translation_prompt("German").hash() != translation_prompt("Russian").hash());
    CHECK(language_name("xx") == "xx");
}

TEST_CASE("mock provider is reproducible and aligned across roles") {
    ProviderConfig e;
    e.role = Role::expert;
    ProviderConfig a = e;
    a.role = Role::amateur;
    a.temperature = 1.5;
    const auto inst = instance("3", "a small test hypothesis");
    const auto s1 = fetch(inst, summarization_prompt(), e);
    CHECK(s1 == fetch(inst, summarization_prompt(), e));
    const auto s2 = fetch(inst, summarization_prompt(), a);
    CHECK(s1.size() == 4);
    CHECK_NOTHROW(validate_alignment(s1, s2, inst.key));
    e.mock_seed = 8;
    CHECK_FALSE(fetch(inst, summarization_prompt(), e) == s1);
}

TEST_CASE("mock generator: roughness 0 gives identical streams") {
    const auto p = mock_generate(5, 30, 0.0);
    for (std::size_t t = 0; t < p.size(); ++t) CHECK(p.expert().tokens[t].prob == p.amateur().tokens[t].prob);
}

TEST_CASE("file provider serves records by key and role") {
    TempDir dir("fileprov");
    ProviderConfig c;
    c.kind = ProviderKind::file;
    c.files = {testing::fixture("case_study/probs.jsonl")};
    c.role = Role::amateur;
    EvaluationInstance inst;
    inst.key = {"mqm23-zh-en", "case", "hyp1"};
    inst.hypothesis = "x";
    CHECK(fetch(inst, translation_prompt(), c).tokens.back().prob == 0.06592);
    inst.key.system_id = "hyp9";
    CHECK_THROWS_AS(fetch(inst, translation_prompt(), c), Error);
}

TEST_CASE("http provider parses responses, sends credentials and caches") {
    FakeBackend backend;
    TempDir cache("cache");
    auto cfg = backend.config("big", Role::expert);
    cfg.cache_dir = cache.path;
    cfg.top_k_capture = 3;
    ::setenv(kCredentialsEnv, "sekrit", 1);
    auto provider = make_provider(cfg);
    ::unsetenv(kCredentialsEnv);
    const auto inst = instance("1", "Where is the logo");
    const auto seq = provider->fetch(inst, translation_prompt("English"));
    CHECK(seq.size() == 4);
    CHECK(seq.tokens[0].prob == doctest::Approx(0.5));
    CHECK(seq.tokens[0].top_k.size() == 3);
    CHECK(seq.tokenizer_id == "fake");
    CHECK(backend.last_auth == "Bearer sekrit");
    CHECK(backend.last_prompt == "Translate the following sentence to English: Quelle 1\n");
    CHECK(backend.hits == 1);

    CHECK(provider->fetch(inst, translation_prompt("English")) == seq); // memory cache
    CHECK(backend.hits == 1);
    auto fresh = make_provider(cfg); // disk cache
    CHECK(fresh->fetch(inst, translation_prompt("English")) == seq);
    CHECK(backend.hits == 1);
    CHECK(fresh->requests() == 0);
    // a different prompt is a different cache entry
    provider->fetch(inst, translation_prompt("German"));
    CHECK(backend.hits == 2);
}

TEST_CASE("http provider retries transient failures with backoff") {
    FakeBackend backend;
    backend.fail_first = 2;
    auto provider = make_provider(backend.config("big", Role::expert));
    CHECK(provider->fetch(instance("1", "a b"), translation_prompt()).size() == 2);
    CHECK(backend.hits == 3);
    CHECK(provider->requests() == 3);

    FakeBackend down;
    down.status_override = 503;
    auto cfg = down.config("big", Role::expert);
    cfg.max_retries = 2;
    try {
        make_provider(cfg)->fetch(instance("1", "a"), translation_prompt());
        FAIL("expected BackendError");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::BackendError);
    }
    CHECK(down.hits == 3);
}

TEST_CASE("client errors are not retried") {
    FakeBackend backend;
    backend.status_override = 400;
    try {
        make_provider(backend.config("big", Role::expert))->fetch(instance("1", "a"), translation_prompt());
        FAIL("expected BackendError");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::BackendError);
    }
    CHECK(backend.hits == 1);
}

TEST_CASE("slow backends time out") {
    FakeBackend backend;
    backend.delay_ms = 600;
    auto cfg = backend.config("big", Role::expert);
    cfg.timeout = std::chrono::milliseconds(100);
    cfg.max_retries = 0;
    try {
        make_provider(cfg)->fetch(instance("1", "a"), translation_prompt());
        FAIL("expected Timeout");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::Timeout);
    }
}

TEST_CASE("tokenization drift between roles is detected through the cache") {
    FakeBackend backend;
    backend.drift_for_amateur = true;
    TempDir cache("drift");
    auto e = backend.config("big", Role::expert);
    auto a = backend.config("small", Role::amateur);
    e.cache_dir = a.cache_dir = cache.path;
    const auto inst = instance("1", "a b c");
    make_provider(e)->fetch(inst, translation_prompt());
    try {
        make_provider(a)->fetch(inst, translation_prompt());
        FAIL("expected TokenizationDrift");
    } catch (const Error &err) {
        CHECK(err.kind() == ErrorKind::TokenizationDrift);
    }
}

TEST_CASE("fetch_all keeps input order under concurrency") {
    FakeBackend backend;
    auto provider = make_provider(backend.config("big", Role::expert));
    std::vector<EvaluationInstance> instances;
    for (int i = 0; i < 25; ++i) instances.push_back(instance(std::to_string(i), std::string(1 + i % 4, 'x') + " y"));
    const auto records = fetch_all(*provider, instances, {translation_prompt()}, 4);
    REQUIRE(records.size() == 25);
    for (int i = 0; i < 25; ++i) CHECK(records[i].key == instances[i].key);
    CHECK(backend.hits == 25);
}

TEST_CASE("provider configuration is validated") {
    ProviderConfig c;
    c.kind = ProviderKind::http;
    CHECK_THROWS_AS(validate(c), Error);
    c.endpoint = "http://127.0.0.1:1/score";
    c.temperature = 0;
    CHECK_THROWS_AS(validate(c), Error);
    ProviderConfig f;
    f.kind = ProviderKind::file;
    CHECK_THROWS_AS(validate(f), Error);
}
