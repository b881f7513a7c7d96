#define CPPHTTPLIB_OPENSSL_SUPPORT  // must match the library build
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "wsd/gateway.hpp"

using namespace wsd;

namespace {

RenderedPrompt prompt_of(const std::string& user) {
    return RenderedPrompt{std::string(kSystemRole), user};
}

ModelSpec test_model() {
    ModelSpec m;
    m.model_key = "test-model";
    m.endpoint_url = "https://example.invalid/v1/chat/completions";
    m.auth_env_var = "WSD_TEST_NO_SUCH_KEY";
    return m;
}

Gateway::Options no_sleep_options() {
    Gateway::Options options;
    options.sleeper = [](int) {};
    return options;
}

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("parse_prediction reads the documented output shape") {
    auto pred = parse_prediction(R"({"word":"dictionary","senseIDs":["dictionary.noun.0"]})");
    CHECK(pred.word == "dictionary");
    CHECK(pred.sense_ids == std::vector<std::string>{"dictionary.noun.0"});
}

TEST_CASE("parse_prediction tolerates prose, fences, and scalar values") {
    std::string text = "Sure! Here is my answer:\n```json\n"
                       "{\"word\": \"bat\", \"sense_id\": \"bat.noun.1\"}\n```\nHope it helps.";
    auto pred = parse_prediction(text);
    CHECK(pred.sense_ids == std::vector<std::string>{"bat.noun.1"});
}

TEST_CASE("parse_prediction fails without JSON or without a sense key") {
    CHECK_THROWS_AS(parse_prediction("no json here"), ParseFailure);
    CHECK_THROWS_AS(parse_prediction(R"({"word":"x","glosses":["a"]})"), ParseFailure);
    CHECK_THROWS_AS(parse_prediction(R"({"word":"x","senseIDs":[]})"), ParseFailure);
}

TEST_CASE("parse_prediction key leniency covers the published spellings") {
    for (const char* key : {"senseIDs", "sense_id", "sense_ids", "finalized senseIDs",
                            "SENSEIDS", "Finalized SenseIDs"}) {
        std::string text = std::string(R"({")") + key + R"(":"a.noun.0"})";
        CHECK(parse_prediction(text).sense_ids == std::vector<std::string>{"a.noun.0"});
    }
}

TEST_CASE("parse_prediction trims and dedupes, preserving first occurrence") {
    auto pred = parse_prediction(
        R"({"senseIDs": [" a.noun.1 ", "a.noun.0", "a.noun.1", "a.noun.0"]})");
    CHECK(pred.sense_ids == std::vector<std::string>{"a.noun.1", "a.noun.0"});
}

TEST_CASE("parse_prediction falls back to the expected word") {
    auto pred = parse_prediction(R"({"senseIDs":["a.noun.0"]})", std::string("alpha"));
    CHECK(pred.word == "alpha");
}

TEST_CASE("parse_prediction is tolerant-idempotent on its own serialization") {
    auto pred = parse_prediction(
        R"(prefix {"word":"run","finalized senseIDs":["run.verb.1","run.verb.0"]} suffix)");
    nlohmann::json canonical = {{"word", pred.word}, {"senseIDs", pred.sense_ids}};
    auto again = parse_prediction(canonical.dump());
    CHECK(again.word == pred.word);
    CHECK(again.sense_ids == pred.sense_ids);
}

TEST_CASE("parse_self_consistency extracts the vote fields") {
    std::string text = R"({
        "word": "a",
        "sense_id": "a.noun.0",
        "strategy_1": "a.noun.0",
        "strategy_2": "a.noun.0, a.noun.1",
        "strategy_3": ["a.noun.1"]
    })";
    auto parsed = parse_self_consistency(text);
    CHECK(parsed.final_ids == std::vector<std::string>{"a.noun.0"});
    CHECK(parsed.strategy1 == std::vector<std::string>{"a.noun.0"});
    CHECK(parsed.strategy2 == std::vector<std::string>{"a.noun.0", "a.noun.1"});
    CHECK(parsed.strategy3 == std::vector<std::string>{"a.noun.1"});
}

TEST_CASE("parse_self_consistency tolerates missing keys") {
    auto parsed = parse_self_consistency(R"({"strategy_1":"x.noun.0","strategy_2":"x.noun.0"})");
    CHECK(parsed.final_ids.empty());
    CHECK(parsed.strategy1 == std::vector<std::string>{"x.noun.0"});
    CHECK(parsed.strategy3.empty());

    CHECK_THROWS_AS(parse_self_consistency("total prose"), ParseFailure);
}

TEST_CASE("parse_sense_filter reads arrays, single objects, and id maps") {
    SUBCASE("array of objects in order") {
        auto pairs = parse_sense_filter(
            R"([{"sense_id":"a.noun.1","sense meaning":"first"},
                {"sense_id":"a.noun.0","sense meaning":"second"}])");
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0] == std::pair<std::string, std::string>{"a.noun.1", "first"});
        CHECK(pairs[1] == std::pair<std::string, std::string>{"a.noun.0", "second"});
    }
    SUBCASE("single object") {
        auto pairs = parse_sense_filter(R"({"sense_id":"a.noun.0","sense meaning":"only"})");
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].first == "a.noun.0");
    }
    SUBCASE("comma-joined ids share the meaning") {
        auto pairs =
            parse_sense_filter(R"({"sense_id":"a.noun.0, a.noun.2","sense meaning":"m"})");
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[1] == std::pair<std::string, std::string>{"a.noun.2", "m"});
    }
    SUBCASE("map of sense id to meaning") {
        auto pairs = parse_sense_filter(R"({"bat.noun.0":"the animal","bat.noun.1":"the club"})");
        REQUIRE(pairs.size() == 2);
        CHECK(pairs[0] == std::pair<std::string, std::string>{"bat.noun.0", "the animal"});
    }
    SUBCASE("prose only fails") {
        CHECK_THROWS_AS(parse_sense_filter("no structured content"), ParseFailure);
        CHECK_THROWS_AS(parse_sense_filter(R"({"irrelevant":"keys"})"), ParseFailure);
    }
}

TEST_CASE("cache_key is stable and argument-sensitive") {
    auto prompt = prompt_of("What does bat mean here?");
    auto key = cache_key("m", prompt, 0.0, 500);
    CHECK(key == cache_key("m", prompt, 0.0, 500));
    CHECK(key != cache_key("m", prompt, 0.5, 500));
    CHECK(key != cache_key("m2", prompt, 0.0, 500));
    CHECK(key != cache_key("m", prompt, 0.0, 501));
    CHECK(key != cache_key("m", prompt_of("What does bat mean here!"), 0.0, 500));
}

TEST_CASE("cache_key collision spot-check over 10k random prompts") {
    std::set<std::string> keys;
    SplitMix64 rng(1234);
    for (int i = 0; i < 10000; ++i) {
        // Equal-length random prompts so only content distinguishes them.
        std::string user(40, 'x');
        for (auto& c : user) c = static_cast<char>('a' + rng.bounded(26));
        keys.insert(cache_key("m", prompt_of(user), 0.0, 500));
    }
    CHECK(keys.size() == 10000);
}

TEST_CASE("replay provider serves fixture text keyed by request digest") {
    ModelSpec model = test_model();
    auto prompt = prompt_of("fixture prompt");
    CacheRecord record;
    record.key = cache_key(model.model_key, prompt, model.temperature, model.max_tokens);
    record.response_text = R"({"word":"x","senseIDs":["x.noun.0"]})";
    record.latency_ms = 5;
    auto provider = make_replay_provider(std::vector<CacheRecord>{record});

    ChatResponse resp = provider->complete(model, prompt);
    CHECK(resp.text == record.response_text);
    CHECK(resp.from_cache);
    CHECK(resp.latency_ms == 5);

    CHECK_THROWS_WITH_AS(provider->complete(model, prompt_of("unknown prompt")),
                         doctest::Contains("no entry"), ProviderTerminalError);
}

TEST_CASE("gateway serves a second identical request from the cache with zero wire calls") {
    std::string path = temp_file("wsd_cache_test.jsonl");
    std::remove(path.c_str());

    ModelSpec model = test_model();
    auto prompt = prompt_of("cached prompt");
    {
        auto provider = std::make_shared<ScriptedProvider>(std::vector<ScriptedProvider::Step>{
            {ScriptedProvider::Step::Kind::ok, "first answer"}});
        Gateway gateway(provider, std::make_shared<ResponseCache>(path), no_sleep_options());
        ChatResponse first = gateway.complete(model, prompt);
        CHECK(first.text == "first answer");
        CHECK(!first.from_cache);
        ChatResponse second = gateway.complete(model, prompt);
        CHECK(second.text == "first answer");
        CHECK(second.from_cache);
        CHECK(provider->attempts() == 1);
        CHECK(gateway.stats().live_calls == 1);
        CHECK(gateway.stats().cache_hits == 1);
    }
    {
        // Fresh gateway over the persisted cache: still zero wire calls.
        auto provider = std::make_shared<ScriptedProvider>(std::vector<ScriptedProvider::Step>{});
        Gateway gateway(provider, std::make_shared<ResponseCache>(path), no_sleep_options());
        ChatResponse resp = gateway.complete(model, prompt);
        CHECK(resp.text == "first answer");
        CHECK(resp.from_cache);
        CHECK(provider->attempts() == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("gateway retries transient failures then succeeds") {
    using Step = ScriptedProvider::Step;
    auto provider = std::make_shared<ScriptedProvider>(std::vector<Step>{
        {Step::Kind::transient, "rate limited"},
        {Step::Kind::transient, "rate limited"},
        {Step::Kind::transient, "rate limited"},
        {Step::Kind::ok, "eventual answer"},
    });
    std::vector<int> sleeps;
    Gateway::Options options;
    options.sleeper = [&](int ms) { sleeps.push_back(ms); };
    Gateway gateway(provider, nullptr, options);

    ChatResponse resp = gateway.complete(test_model(), prompt_of("p"));
    CHECK(resp.text == "eventual answer");
    CHECK(provider->attempts() == 4);  // success after 3 retries
    CHECK(sleeps == std::vector<int>{1000, 2000, 4000});
    CHECK(gateway.stats().retries == 3);
    CHECK(resp.latency_ms >= 0);
}

TEST_CASE("gateway surfaces exhausted retries as a terminal error") {
    using Step = ScriptedProvider::Step;
    auto provider = std::make_shared<ScriptedProvider>(
        std::vector<Step>(4, Step{Step::Kind::transient, "HTTP 503: upstream sad"}));
    Gateway gateway(provider, nullptr, no_sleep_options());
    CHECK_THROWS_WITH_AS(gateway.complete(test_model(), prompt_of("p")),
                         doctest::Contains("retries exhausted"), ProviderTerminalError);
    CHECK(provider->attempts() == 4);
}

TEST_CASE("gateway propagates terminal errors without retrying") {
    using Step = ScriptedProvider::Step;
    auto provider = std::make_shared<ScriptedProvider>(
        std::vector<Step>{{Step::Kind::terminal, "auth failure: HTTP 401"}});
    Gateway gateway(provider, nullptr, no_sleep_options());
    CHECK_THROWS_WITH_AS(gateway.complete(test_model(), prompt_of("p")),
                         doctest::Contains("auth failure"), ProviderTerminalError);
    CHECK(provider->attempts() == 1);
}

TEST_CASE("http provider refuses to run without credentials") {
    auto provider = make_http_provider();
    ModelSpec model = test_model();  // env var intentionally unset
    CHECK_THROWS_WITH_AS(provider->complete(model, prompt_of("p")),
                         doctest::Contains("credentials"), ProviderTerminalError);
}

TEST_CASE("http provider speaks the chat-completion wire shape and retries 429s") {
    httplib::Server server;
    std::atomic<int> hits{0};
    nlohmann::json seen_request;
    std::string seen_auth;
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    int hit = ++hits;
                    seen_auth = req.get_header_value("Authorization");
                    seen_request = nlohmann::json::parse(req.body);
                    if (hit == 1) {
                        res.status = 429;
                        res.set_content("rate limited", "text/plain");
                        return;
                    }
                    nlohmann::json choice_content = {{"word", "x"},
                                                     {"senseIDs", {"x.noun.0"}}};
                    nlohmann::json body = {
                        {"choices",
                         {{{"message",
                            {{"role", "assistant"}, {"content", choice_content.dump()}}}}}},
                        {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 7}}},
                    };
                    res.set_content(body.dump(), "application/json");
                });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("WSD_HTTP_TEST_KEY", "sekrit", 1);
    ModelSpec model;
    model.model_key = "local-model";
    model.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    model.auth_env_var = "WSD_HTTP_TEST_KEY";
    model.temperature = 0.0;
    model.max_tokens = 500;

    Gateway gateway(make_http_provider(), nullptr, no_sleep_options());
    ChatResponse resp = gateway.complete(model, prompt_of("what does x mean"));

    CHECK(hits == 2);  // one 429, one success
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_request["model"] == "local-model");
    CHECK(seen_request["temperature"] == 0.0);
    CHECK(seen_request["max_tokens"] == 500);
    REQUIRE(seen_request["messages"].size() == 2);
    CHECK(seen_request["messages"][0]["role"] == "system");
    CHECK(seen_request["messages"][0]["content"] == std::string(kSystemRole));
    CHECK(seen_request["messages"][1]["role"] == "user");
    CHECK(seen_request["messages"][1]["content"] == "what does x mean");

    CHECK(parse_prediction(resp.text).sense_ids == std::vector<std::string>{"x.noun.0"});
    CHECK(resp.prompt_tokens == 12);
    CHECK(resp.completion_tokens == 7);
    CHECK(!resp.from_cache);

    server.stop();
    server_thread.join();
    unsetenv("WSD_HTTP_TEST_KEY");
}

TEST_CASE("http provider treats auth rejections as terminal") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
        res.set_content("bad key", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("WSD_HTTP_TEST_KEY", "wrong", 1);
    ModelSpec model;
    model.model_key = "local-model";
    model.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    model.auth_env_var = "WSD_HTTP_TEST_KEY";

    Gateway gateway(make_http_provider(), nullptr, no_sleep_options());
    CHECK_THROWS_WITH_AS(gateway.complete(model, prompt_of("p")),
                         doctest::Contains("auth failure"), ProviderTerminalError);

    server.stop();
    server_thread.join();
    unsetenv("WSD_HTTP_TEST_KEY");
}

TEST_CASE("response cache persists, reloads, and prunes") {
    std::string path = temp_file("wsd_cache_prune.jsonl");
    std::remove(path.c_str());
    {
        ResponseCache cache(path);
        cache.put(CacheRecord{"k1", "model-a", "2024-01-01T00:00:00Z", "r1", 1, 2, 3});
        cache.put(CacheRecord{"k2", "model-b", "2024-06-01T00:00:00Z", "r2", 1, 2, 3});
        CHECK(cache.size() == 2);
    }
    {
        ResponseCache cache(path);
        CHECK(cache.size() == 2);
        REQUIRE(cache.get("k1").has_value());
        CHECK(cache.get("k1")->response_text == "r1");
        std::size_t dropped =
            cache.prune([](const CacheRecord& r) { return r.model_key == "model-b"; });
        CHECK(dropped == 1);
        CHECK(!cache.get("k1").has_value());
        CHECK(cache.get("k2").has_value());
    }
    {
        ResponseCache cache(path);  // pruned state persisted
        CHECK(cache.size() == 1);
    }
    std::remove(path.c_str());
}
