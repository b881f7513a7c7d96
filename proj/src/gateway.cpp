#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "wsd/gateway.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace wsd {

namespace {

using Clock = std::chrono::steady_clock;
using OrderedJson = nlohmann::ordered_json;

std::string length_prefixed(std::string_view field) {
    return std::to_string(field.size()) + ":" + std::string(field) + "|";
}

std::string shortest_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed for double");
    return std::string(buf, ptr);
}

}  // namespace

std::string cache_key(const std::string& model_key, const RenderedPrompt& prompt,
                      double temperature, int max_tokens) {
    std::string material = "wsd-cache-v1|";
    material += length_prefixed(model_key);
    material += length_prefixed(prompt.system_text);
    material += length_prefixed(prompt.user_text);
    material += length_prefixed(shortest_double(temperature));
    material += length_prefixed(std::to_string(max_tokens));
    return sha256_hex(material);
}

// ---------------------------------------------------------------------------
// Response cache

namespace {

nlohmann::json record_to_json(const CacheRecord& r) {
    return {{"key", r.key},
            {"model_key", r.model_key},
            {"created_at", r.created_at},
            {"response_text", r.response_text},
            {"prompt_tokens", r.prompt_tokens},
            {"completion_tokens", r.completion_tokens},
            {"latency_ms", r.latency_ms}};
}

CacheRecord record_from_json(const nlohmann::json& j, const std::string& path, size_t line_no) {
    if (!j.is_object() || !j.contains("key") || !j.contains("response_text"))
        throw DataError(path + ": line " + std::to_string(line_no) +
                        " is not a cache record (needs at least key and response_text)");
    CacheRecord r;
    r.key = j["key"].get<std::string>();
    r.model_key = j.value("model_key", std::string());
    r.created_at = j.value("created_at", std::string());
    r.response_text = j["response_text"].get<std::string>();
    r.prompt_tokens = std::max(0L, j.value("prompt_tokens", 0L));
    r.completion_tokens = std::max(0L, j.value("completion_tokens", 0L));
    r.latency_ms = std::max(0L, j.value("latency_ms", 0L));
    return r;
}

}  // namespace

std::vector<CacheRecord> ResponseCache::read_all(const std::string& path) {
    std::vector<CacheRecord> records;
    std::ifstream in(path);
    if (!in) return records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(path + ": line " + std::to_string(line_no) + " is not valid JSON");
        records.push_back(record_from_json(j, path, line_no));
    }
    return records;
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
    for (auto& r : read_all(path_)) {
        std::string key = r.key;
        entries_[key] = std::move(r);  // later lines win
    }
}

std::optional<CacheRecord> ResponseCache::get(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const CacheRecord& record) {
    std::lock_guard lock(mutex_);
    entries_[record.key] = record;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache file: " + path_);
    out << record_to_json(record).dump() << '\n';
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t ResponseCache::prune(const std::function<bool(const CacheRecord&)>& keep) {
    std::lock_guard lock(mutex_);
    std::size_t before = entries_.size();
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw DataError("cannot rewrite cache file: " + path_);
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (keep(it->second)) {
            out << record_to_json(it->second).dump() << '\n';
            ++it;
        } else {
            it = entries_.erase(it);
        }
    }
    return before - entries_.size();
}

// ---------------------------------------------------------------------------
// Providers

namespace {

struct UrlParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

UrlParts split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint_url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpProvider : public ChatProvider {
public:
    ChatResponse complete(const ModelSpec& model, const RenderedPrompt& prompt) override {
        const char* key = nullptr;
        if (!model.auth_env_var.empty()) key = std::getenv(model.auth_env_var.c_str());
        if (model.auth_env_var.empty() || key == nullptr || *key == '\0')
            throw ProviderTerminalError("auth failure: credentials not found in environment "
                                        "variable '" +
                                        model.auth_env_var + "'");

        auto parts = split_url(model.endpoint_url);
        httplib::Client client(parts.base);
        client.set_connection_timeout(30, 0);
        client.set_read_timeout(120, 0);

        httplib::Headers headers;
        if (model.auth_header == "Authorization")
            headers.emplace("Authorization", std::string("Bearer ") + key);
        else
            headers.emplace(model.auth_header, key);

        nlohmann::json request = {
            {"model", model.model_key},
            {"messages",
             {{{"role", "system"}, {"content", prompt.system_text}},
              {{"role", "user"}, {"content", prompt.user_text}}}},
            {"temperature", model.temperature},
            {"max_tokens", model.max_tokens},
        };

        auto start = Clock::now();
        auto result = client.Post(parts.path, headers, request.dump(), "application/json");
        long latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();

        if (!result)
            throw ProviderTransientError("connection failure: " +
                                         httplib::to_string(result.error()));
        int status = result->status;
        if (status == 401 || status == 403)
            throw ProviderTerminalError("auth failure: HTTP " + std::to_string(status) + " from " +
                                        model.endpoint_url);
        if (status == 408 || status == 409 || status == 425 || status == 429 || status >= 500)
            throw ProviderTransientError("HTTP " + std::to_string(status) + ": " +
                                         result->body.substr(0, 200));
        if (status < 200 || status >= 300)
            throw ProviderTerminalError("HTTP " + std::to_string(status) + " from " +
                                        model.endpoint_url + ": " + result->body.substr(0, 500));

        nlohmann::json body = nlohmann::json::parse(result->body, nullptr, false);
        if (body.is_discarded() || !body.contains("choices") || !body["choices"].is_array() ||
            body["choices"].empty())
            throw ProviderTerminalError("malformed provider response (no choices): " +
                                        result->body.substr(0, 200));
        const auto& choice = body["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content"))
            throw ProviderTerminalError("malformed provider response (no message content)");

        ChatResponse resp;
        resp.text = choice["message"]["content"].is_null()
                        ? std::string()
                        : choice["message"]["content"].get<std::string>();
        if (body.contains("usage") && body["usage"].is_object()) {
            resp.prompt_tokens = body["usage"].value("prompt_tokens", 0L);
            resp.completion_tokens = body["usage"].value("completion_tokens", 0L);
        }
        resp.latency_ms = latency;
        return resp;
    }

    std::string name() const override { return "http"; }
};

class ReplayProvider : public ChatProvider {
public:
    explicit ReplayProvider(std::vector<CacheRecord> records) {
        for (auto& r : records) {
            std::string key = r.key;
            entries_[key] = std::move(r);
        }
    }

    ChatResponse complete(const ModelSpec& model, const RenderedPrompt& prompt) override {
        std::string key = cache_key(model.model_key, prompt, model.temperature, model.max_tokens);
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw ProviderTerminalError("replay fixture has no entry for request digest " + key +
                                        " (model '" + model.model_key + "')");
        ChatResponse resp;
        resp.text = it->second.response_text;
        resp.prompt_tokens = it->second.prompt_tokens;
        resp.completion_tokens = it->second.completion_tokens;
        resp.latency_ms = it->second.latency_ms;
        resp.from_cache = true;
        return resp;
    }

    std::string name() const override { return "replay"; }

private:
    std::unordered_map<std::string, CacheRecord> entries_;
};

}  // namespace

std::unique_ptr<ChatProvider> make_http_provider() { return std::make_unique<HttpProvider>(); }

std::unique_ptr<ChatProvider> make_replay_provider(const std::string& fixture_path) {
    std::ifstream probe(fixture_path);
    if (!probe) throw DataError("cannot open replay fixture: " + fixture_path);
    return std::make_unique<ReplayProvider>(ResponseCache::read_all(fixture_path));
}

std::unique_ptr<ChatProvider> make_replay_provider(std::vector<CacheRecord> records) {
    return std::make_unique<ReplayProvider>(std::move(records));
}

ChatResponse ScriptedProvider::complete(const ModelSpec&, const RenderedPrompt& prompt) {
    attempts_.fetch_add(1);
    if (responder_) {
        ChatResponse resp;
        resp.text = responder_(prompt);
        return resp;
    }
    Step step;
    {
        std::lock_guard lock(mutex_);
        if (steps_.empty()) throw ProviderTerminalError("scripted provider: script exhausted");
        step = steps_.front();
        steps_.erase(steps_.begin());
    }
    switch (step.kind) {
        case Step::Kind::ok: {
            ChatResponse resp;
            resp.text = step.payload;
            return resp;
        }
        case Step::Kind::transient: throw ProviderTransientError(step.payload);
        case Step::Kind::terminal: throw ProviderTerminalError(step.payload);
    }
    throw std::logic_error("unreachable scripted step kind");
}

// ---------------------------------------------------------------------------
// Gateway

class InFlightLimiter {
public:
    explicit InFlightLimiter(int n) : available_(n > 0 ? n : 1) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

namespace {

struct LimiterGuard {
    InFlightLimiter& limiter;
    explicit LimiterGuard(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
    ~LimiterGuard() { limiter.release(); }
};

}  // namespace

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, std::shared_ptr<ResponseCache> cache)
    : Gateway(std::move(provider), std::move(cache), Options()) {}

Gateway::Gateway(Gateway&& other) noexcept
    : provider_(std::move(other.provider_)),
      cache_(std::move(other.cache_)),
      options_(std::move(other.options_)),
      live_calls_(other.live_calls_.load()),
      cache_hits_(other.cache_hits_.load()),
      retries_(other.retries_.load()),
      limiter_(std::move(other.limiter_)) {}

Gateway::~Gateway() = default;

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, std::shared_ptr<ResponseCache> cache,
                 Options options)
    : provider_(std::move(provider)),
      cache_(std::move(cache)),
      options_(std::move(options)),
      limiter_(std::make_unique<InFlightLimiter>(options_.max_in_flight)) {
    if (!provider_) throw ConfigError("gateway requires a provider");
    if (!options_.sleeper)
        options_.sleeper = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

ChatResponse Gateway::complete(const ModelSpec& model, const RenderedPrompt& prompt) {
    std::string key = cache_key(model.model_key, prompt, model.temperature, model.max_tokens);
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            cache_hits_.fetch_add(1);
            ChatResponse resp;
            resp.text = hit->response_text;
            resp.prompt_tokens = hit->prompt_tokens;
            resp.completion_tokens = hit->completion_tokens;
            resp.latency_ms = hit->latency_ms;
            resp.from_cache = true;
            return resp;
        }
    }
    ChatResponse resp = call_with_retries(model, prompt);
    if (cache_) {
        CacheRecord record{key,       model.model_key,        utc_timestamp(), resp.text,
                           resp.prompt_tokens, resp.completion_tokens, resp.latency_ms};
        cache_->put(record);
    }
    return resp;
}

ChatResponse Gateway::call_with_retries(const ModelSpec& model, const RenderedPrompt& prompt) {
    LimiterGuard guard(*limiter_);
    auto start = Clock::now();
    for (int attempt = 0;; ++attempt) {
        try {
            live_calls_.fetch_add(1);
            ChatResponse resp = provider_->complete(model, prompt);
            if (resp.latency_ms == 0)
                resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      Clock::now() - start)
                                      .count();
            return resp;
        } catch (const ProviderTransientError& err) {
            if (attempt >= options_.max_retries)
                throw ProviderTerminalError(std::string("retries exhausted after ") +
                                            std::to_string(attempt + 1) +
                                            " attempts; last failure: " + err.what());
            retries_.fetch_add(1);
            int idx = attempt < static_cast<int>(options_.backoff_ms.size())
                          ? attempt
                          : static_cast<int>(options_.backoff_ms.size()) - 1;
            if (idx >= 0 && !options_.backoff_ms.empty()) options_.sleeper(options_.backoff_ms[idx]);
        }
    }
}

Gateway::Stats Gateway::stats() const {
    return Stats{live_calls_.load(), cache_hits_.load(), retries_.load()};
}

// ---------------------------------------------------------------------------
// Output parsers

namespace {

// Lowercases and drops whitespace and underscores, so "finalized senseIDs",
// "sense_ids" and "senseIDs" compare equal to their canonical spellings.
std::string normalize_key(std::string_view key) {
    std::string out;
    for (char c : key) {
        if (c == '_' || std::isspace(static_cast<unsigned char>(c))) continue;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_sense_key(std::string_view key) {
    std::string n = normalize_key(key);
    return n == "senseid" || n == "senseids" || n == "finalizedsenseids";
}

bool is_word_key(std::string_view key) {
    std::string n = normalize_key(key);
    return n == "word" || n == "ambiguityword";
}

// Finds the end of a balanced JSON object/array starting at `start`
// (string- and escape-aware); npos when unbalanced.
size_t balanced_end(const std::string& text, size_t start) {
    char open = text[start];
    char close = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false, escaped = false;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == open)
            ++depth;
        else if (c == close) {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::string::npos;
}

// First balanced substring that parses as a JSON value of the wanted kind.
// Scanning skips prose and code fences naturally.
std::optional<OrderedJson> first_json_value(const std::string& text, bool allow_array) {
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '{' && !(allow_array && c == '[')) continue;
        size_t end = balanced_end(text, i);
        if (end == std::string::npos) continue;
        OrderedJson parsed =
            OrderedJson::parse(text.substr(i, end - i + 1), nullptr, /*allow_exceptions=*/false);
        if (!parsed.is_discarded()) return parsed;
        // Not valid JSON despite balancing; resume after the opener.
    }
    return std::nullopt;
}

void append_ids(const OrderedJson& value, bool split_commas, std::vector<std::string>& out) {
    if (value.is_string()) {
        std::string s = value.get<std::string>();
        if (split_commas && s.find(',') != std::string::npos) {
            for (const auto& part : split_list(s)) out.push_back(part);
        } else {
            std::string t = trim(s);
            if (!t.empty()) out.push_back(std::move(t));
        }
    } else if (value.is_number_integer()) {
        out.push_back(std::to_string(value.get<long long>()));
    } else if (value.is_array()) {
        for (const auto& item : value) append_ids(item, split_commas, out);
    }
    // Objects, booleans, and nulls carry no usable id.
}

std::vector<std::string> dedupe(std::vector<std::string> ids) {
    std::vector<std::string> out;
    for (auto& id : ids)
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
    return out;
}

std::vector<std::string> extract_id_list(const OrderedJson& value, bool split_commas) {
    std::vector<std::string> ids;
    append_ids(value, split_commas, ids);
    return dedupe(std::move(ids));
}

}  // namespace

Prediction parse_prediction(const std::string& text,
                            const std::optional<std::string>& expected_word) {
    auto obj = first_json_value(text, /*allow_array=*/false);
    if (!obj) throw ParseFailure("no JSON object found in model output");

    Prediction pred;
    bool found_key = false;
    for (const auto& [key, value] : obj->items()) {
        if (is_sense_key(key) && !found_key) {
            found_key = true;
            pred.sense_ids = extract_id_list(value, /*split_commas=*/false);
        } else if (is_word_key(key) && value.is_string()) {
            pred.word = trim(value.get<std::string>());
        }
    }
    if (!found_key) throw ParseFailure("JSON object has no recognizable sense-ID key");
    if (pred.sense_ids.empty())
        throw ParseFailure("sense-ID key present but holds no usable sense id");
    if (pred.word.empty() && expected_word) pred.word = *expected_word;
    return pred;
}

SelfConsistencyParse parse_self_consistency(const std::string& text) {
    auto obj = first_json_value(text, /*allow_array=*/false);
    if (!obj) throw ParseFailure("no JSON object found in model output");

    SelfConsistencyParse out;
    for (const auto& [key, value] : obj->items()) {
        std::string n = normalize_key(key);
        if (is_sense_key(key))
            out.final_ids = extract_id_list(value, /*split_commas=*/true);
        else if (n == "strategy1")
            out.strategy1 = extract_id_list(value, /*split_commas=*/true);
        else if (n == "strategy2")
            out.strategy2 = extract_id_list(value, /*split_commas=*/true);
        else if (n == "strategy3")
            out.strategy3 = extract_id_list(value, /*split_commas=*/true);
    }
    return out;
}

namespace {

std::string meaning_of(const OrderedJson& obj) {
    for (const auto& [key, value] : obj.items()) {
        std::string n = normalize_key(key);
        if (n == "sensemeaning" || n == "meaning") {
            if (value.is_string()) return trim(value.get<std::string>());
            if (value.is_array() && !value.empty() && value[0].is_string())
                return trim(value[0].get<std::string>());
        }
    }
    return {};
}

void pairs_from_object(const OrderedJson& obj,
                       std::vector<std::pair<std::string, std::string>>& out) {
    std::vector<std::string> ids;
    for (const auto& [key, value] : obj.items())
        if (is_sense_key(key)) {
            ids = extract_id_list(value, /*split_commas=*/true);
            break;
        }
    if (!ids.empty()) {
        std::string meaning = meaning_of(obj);
        for (auto& id : ids) out.emplace_back(std::move(id), meaning);
        return;
    }
    // Fall back to a map shape: { "<sense_id>": "<meaning>", ... }.
    for (const auto& [key, value] : obj.items()) {
        std::string id = trim(key);
        try {
            parse_sense_id(id);
        } catch (const DataError&) {
            continue;
        }
        out.emplace_back(id, value.is_string() ? trim(value.get<std::string>()) : std::string());
    }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_sense_filter(const std::string& text) {
    auto value = first_json_value(text, /*allow_array=*/true);
    if (!value) throw ParseFailure("no JSON value found in model output");

    std::vector<std::pair<std::string, std::string>> pairs;
    if (value->is_array()) {
        for (const auto& item : *value) {
            if (item.is_object())
                pairs_from_object(item, pairs);
            else if (item.is_string()) {
                std::string id = trim(item.get<std::string>());
                if (!id.empty()) pairs.emplace_back(id, std::string());
            }
        }
    } else if (value->is_object()) {
        pairs_from_object(*value, pairs);
    }
    if (pairs.empty()) throw ParseFailure("no (sense_id, meaning) pairs found in model output");
    return pairs;
}

}  // namespace wsd
