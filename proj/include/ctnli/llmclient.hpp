#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ctnli/error.hpp"

namespace ctnli {

enum class TemplateName { NqaGenerate, SpEntail, SpContradict };

std::string_view template_id(TemplateName name);

struct PromptTemplate {
    TemplateName name;
    std::string text;  // contains exactly one "{statement}" slot
};

// The three generation prompts, verbatim.
const PromptTemplate& builtin_template(TemplateName name);

// Substitutes the statement into the slot once; the statement itself is not
// scanned for further slots.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view statement);

struct Decoding {
    double temperature = 0.0;
    int max_tokens = 512;
};

struct GenerationRequest {
    TemplateName template_name = TemplateName::SpEntail;
    std::string statement;
    Decoding decoding;
    std::string model_name = "gpt-3.5-turbo";
};

// Hex SHA-256 over a canonical serialization of model, template, rendered
// prompt, and decoding parameters.
std::string cache_key(const GenerationRequest& request, std::string_view rendered_prompt);
std::string cache_key(const GenerationRequest& request);

struct TransportRequest {
    std::string model_name;
    std::string prompt;
    Decoding decoding;
    TemplateName template_name = TemplateName::SpEntail;
    std::string statement;  // the text substituted into the template
};

struct TransportResponse {
    int status = 0;  // HTTP-style; 200 = success, 0 = no response at all
    std::string body;
};

// Sends one prompt and returns one completion. Implementations must be safe
// to call from several threads at once.
class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResponse send(const TransportRequest& request) = 0;
};

// 0 (no response), 408, 429 and 5xx are worth retrying.
bool is_transient_status(int status);

// OpenAI-style chat-completions endpoint over HTTP(S).
class HttpChatTransport : public Transport {
public:
    // endpoint: full URL such as https://api.openai.com/v1/chat/completions
    HttpChatTransport(std::string endpoint, std::string api_key,
                      std::chrono::seconds timeout = std::chrono::seconds(120));
    TransportResponse send(const TransportRequest& request) override;

private:
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

// Serves canned responses. A replay file is a JSON object whose keys are
// template ids ("nqa-generate", "sp-entail", "sp-contradict") mapping
// statement -> response, plus an optional "prompts" object mapping a full
// rendered prompt -> response. Unknown requests yield status 404.
class ReplayTransport : public Transport {
public:
    ReplayTransport(std::map<std::string, std::string> by_prompt,
                    std::map<std::pair<TemplateName, std::string>, std::string> by_statement = {})
        : by_prompt_(std::move(by_prompt)), by_statement_(std::move(by_statement)) {}
    static ReplayTransport from_file(const std::filesystem::path& path);

    TransportResponse send(const TransportRequest& request) override;

private:
    std::map<std::string, std::string> by_prompt_;
    std::map<std::pair<TemplateName, std::string>, std::string> by_statement_;
};

// Wraps a callback; counts calls. Used for offline runs and tests.
class MockTransport : public Transport {
public:
    using Handler = std::function<TransportResponse(const TransportRequest&)>;
    explicit MockTransport(Handler handler) : handler_(std::move(handler)) {}

    TransportResponse send(const TransportRequest& request) override {
        calls_.fetch_add(1);
        return handler_(request);
    }
    std::size_t calls() const { return calls_.load(); }

private:
    Handler handler_;
    std::atomic<std::size_t> calls_{0};
};

struct CacheEntry {
    std::string key;
    std::string response_text;
    std::string timestamp;  // ISO-8601 UTC
};

// Content-addressed response cache: one file per key under a directory.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<CacheEntry> get(const std::string& key) const;
    void put(const CacheEntry& entry, const GenerationRequest& request) const;
    std::filesystem::path path_for(const std::string& key) const;

private:
    std::filesystem::path dir_;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
};

struct ClientStats {
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::size_t transport_calls = 0;
};

// Error for one request that is not a transport failure (e.g. empty body).
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Generation {
    std::string text;
    std::string cache_key;
    bool from_cache = false;
};

// Outcome of one request in a batch: a generation, or the exception it raised.
using GenerationOutcome = std::variant<Generation, std::exception_ptr>;

class LlmClient {
public:
    // `transport` may be null: the client then serves from cache only and
    // raises TransportError on a miss.
    LlmClient(std::filesystem::path cache_dir, Transport* transport, RetryPolicy retry = {},
              std::size_t parallelism = 4);

    // Cache first; on a miss, the transport is called (with retries) and the
    // response is persisted before it is returned.
    Generation generate(const GenerationRequest& request);

    // Runs requests with at most `parallelism` in flight. Results keep input order.
    std::vector<GenerationOutcome> generate_all(std::span<const GenerationRequest> requests);

    ClientStats stats() const;

private:
    ResponseCache cache_;
    Transport* transport_;
    RetryPolicy retry_;
    std::size_t parallelism_;
    mutable std::mutex stats_mutex_;
    ClientStats stats_;
};

}  // namespace ctnli
