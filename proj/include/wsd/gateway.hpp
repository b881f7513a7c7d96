#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsd/prompts.hpp"
#include "wsd/util.hpp"

namespace wsd {

struct ModelSpec {
    std::string model_key;
    std::string endpoint_url;
    std::string auth_env_var;
    std::string auth_header = "Authorization";  // "Authorization" gets a Bearer prefix
    double temperature = 0.0;
    int max_tokens = 500;
};

struct ChatResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
    bool from_cache = false;
};

// Ordered candidate sense ids, most-confident first.
struct Prediction {
    std::string word;
    std::vector<std::string> sense_ids;

    bool operator==(const Prediction&) const = default;
};

// A model response from which no sense id could be extracted. Handled, not
// fatal: the evaluator scores the instance incorrect.
struct ParseFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Retryable wire failure (timeouts, rate limits, 5xx).
struct ProviderTransientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-retryable provider failure (auth, missing fixture, exhausted retries).
// Exit code 3 at the CLI.
struct ProviderTerminalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stable content digest over everything that shapes a completion. Any change
// to any argument changes the key.
std::string cache_key(const std::string& model_key, const RenderedPrompt& prompt,
                      double temperature, int max_tokens);

struct CacheRecord {
    std::string key;
    std::string model_key;
    std::string created_at;
    std::string response_text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
};

// Append-only line-delimited JSON store keyed by cache_key. Reads are
// concurrent; writes are serialized.
class ResponseCache {
public:
    explicit ResponseCache(std::string path);

    std::optional<CacheRecord> get(const std::string& key) const;
    void put(const CacheRecord& record);
    std::size_t size() const;
    const std::string& path() const { return path_; }

    // Rewrites the store keeping records that pass the filter; returns the
    // number dropped.
    std::size_t prune(const std::function<bool(const CacheRecord&)>& keep);

    static std::vector<CacheRecord> read_all(const std::string& path);

private:
    std::string path_;
    std::unordered_map<std::string, CacheRecord> entries_;
    mutable std::mutex mutex_;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ModelSpec& model, const RenderedPrompt& prompt) = 0;
    virtual std::string name() const = 0;
};

// JSON-over-HTTPS chat-completion client:
//   request  {model, messages:[{role:"system"},{role:"user"}], temperature, max_tokens}
//   response text from choices[0].message.content
std::unique_ptr<ChatProvider> make_http_provider();

// Serves responses from a fixture keyed by request digest; never touches the
// network and needs no credentials. Missing entries are terminal errors.
std::unique_ptr<ChatProvider> make_replay_provider(const std::string& fixture_path);
std::unique_ptr<ChatProvider> make_replay_provider(std::vector<CacheRecord> records);

// Scripted fake for fault injection; consumes one step per call.
class ScriptedProvider : public ChatProvider {
public:
    struct Step {
        enum class Kind { ok, transient, terminal } kind = Kind::ok;
        std::string payload;  // response text, or error status text
    };

    explicit ScriptedProvider(std::vector<Step> steps) : steps_(std::move(steps)) {}

    // Convenience: every call succeeds with text produced by the callback.
    explicit ScriptedProvider(std::function<std::string(const RenderedPrompt&)> responder)
        : responder_(std::move(responder)) {}

    ChatResponse complete(const ModelSpec& model, const RenderedPrompt& prompt) override;
    std::string name() const override { return "scripted"; }
    int attempts() const { return attempts_.load(); }

private:
    std::vector<Step> steps_;
    std::function<std::string(const RenderedPrompt&)> responder_;
    std::atomic<int> attempts_{0};
    std::mutex mutex_;
};

// Wraps a provider with retry, response caching, and an in-flight bound.
class Gateway {
public:
    struct Options {
        int max_retries = 3;                              // retries after the first attempt
        std::vector<int> backoff_ms = {1000, 2000, 4000};
        int max_in_flight = 4;
        std::function<void(int)> sleeper;                 // injectable for tests
    };

    struct Stats {
        long live_calls = 0;
        long cache_hits = 0;
        long retries = 0;
    };

    Gateway(std::shared_ptr<ChatProvider> provider, std::shared_ptr<ResponseCache> cache);
    Gateway(std::shared_ptr<ChatProvider> provider, std::shared_ptr<ResponseCache> cache,
            Options options);
    Gateway(Gateway&&) noexcept;
    ~Gateway();

    // Cache lookup first; otherwise the provider with bounded retries on
    // transient failures. Successful live responses are written back.
    ChatResponse complete(const ModelSpec& model, const RenderedPrompt& prompt);

    Stats stats() const;

private:
    ChatResponse call_with_retries(const ModelSpec& model, const RenderedPrompt& prompt);

    std::shared_ptr<ChatProvider> provider_;
    std::shared_ptr<ResponseCache> cache_;
    Options options_;
    std::atomic<long> live_calls_{0};
    std::atomic<long> cache_hits_{0};
    std::atomic<long> retries_{0};
    std::unique_ptr<class InFlightLimiter> limiter_;
};

// Locates the first balanced JSON object in free-form model output (code
// fences and surrounding prose tolerated) and pulls the sense ids out of it.
// Accepted key spellings, compared case-insensitively after dropping
// whitespace and underscores: senseIDs, sense_id, sense_ids,
// "finalized senseIDs". A scalar value becomes a one-element list; duplicates
// collapse to the first occurrence; ids are whitespace-trimmed.
Prediction parse_prediction(const std::string& text,
                            const std::optional<std::string>& expected_word = std::nullopt);

struct SelfConsistencyParse {
    std::vector<std::string> final_ids;
    std::vector<std::string> strategy1;
    std::vector<std::string> strategy2;
    std::vector<std::string> strategy3;
};

// Same key leniency as parse_prediction for the final "sense_id" plus the
// strategy_1..3 fields; comma-separated values split into lists; absent
// strategy keys yield empty lists.
SelfConsistencyParse parse_self_consistency(const std::string& text);

// The aspect-filter stage returns (sense_id, meaning) pairs from an object or
// an array of objects; order preserved, unknown keys ignored.
std::vector<std::pair<std::string, std::string>> parse_sense_filter(const std::string& text);

}  // namespace wsd
