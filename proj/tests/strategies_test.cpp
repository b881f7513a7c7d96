#include <algorithm>

#include "doctest.h"
#include "wsd/strategies.hpp"

using namespace wsd;

namespace {

using V = std::vector<std::string>;

SenseEntry entry(const std::string& id, const std::string& gloss,
                 std::vector<std::string> synonyms = {}) {
    auto parts = parse_sense_id(id);
    SenseEntry e;
    e.sense_id = id;
    e.lemma = parts.lemma;
    e.pos = parts.pos;
    e.gloss = gloss;
    e.synonyms = std::move(synonyms);
    return e;
}

WsdInstance labeled(const std::string& id, const std::string& sentence, const std::string& gold) {
    WsdInstance inst;
    inst.instance_id = id;
    inst.sentence = sentence;
    auto open = sentence.find("<WSD>");
    auto close = sentence.find("</WSD>");
    inst.target_surface = trim(sentence.substr(open + 5, close - open - 5));
    auto parts = parse_sense_id(gold);
    inst.lemma = parts.lemma;
    inst.pos = parts.pos;
    inst.gold_sense_id = gold;
    return inst;
}

struct Fixture {
    SenseInventory inventory;
    std::vector<WsdInstance> train;
    KnowledgeBase kb;
    ModelSpec model;

    Fixture() {
        for (const auto& e :
             {entry("bat.noun.0", "A small flying mammal.", {"flying fox"}),
              entry("bat.noun.1", "A club used for hitting balls.", {"club"}),
              entry("dictionary.noun.0", "A reference work with a list of words.", {"wordbook"}),
              entry("post.noun.0", "Mail; letters and parcels.", {"mail"}),
              entry("post.noun.1", "A long upright piece of wood or metal.", {"pole"}),
              entry("post.noun.2", "A position of paid employment.", {"job"})})
            inventory.emplace(e.sense_id, e);
        train = {
            labeled("tr1", "A <WSD> bat </WSD> flew out of the cave.", "bat.noun.0"),
            labeled("tr2", "The <WSD> bat </WSD> hunted moths at night.", "bat.noun.0"),
            labeled("tr3", "He gripped the <WSD> bat </WSD> and waited.", "bat.noun.1"),
            labeled("tr4", "The <WSD> post </WSD> arrived before lunch.", "post.noun.0"),
            labeled("tr5", "A fence <WSD> post </WSD> rotted away.", "post.noun.1"),
            labeled("tr6", "She applied for the vacant <WSD> post </WSD>.", "post.noun.2"),
        };
        kb = build_kb(train);
        model.model_key = "fixture-model";
        model.auth_env_var = "WSD_TEST_NO_SUCH_KEY";
    }
};

Gateway::Options quiet_options() {
    Gateway::Options options;
    options.sleeper = [](int) {};
    return options;
}

}  // namespace

TEST_CASE("majority_vote matches the published agreement rules") {
    auto unanimous = majority_vote(V{"x"}, V{"x"}, V{"x"});
    CHECK(unanimous.agreement == VoteOutcome::Agreement::unanimous);
    CHECK(unanimous.winner_ids == V{"x"});

    auto majority = majority_vote(V{"x"}, V{"y"}, V{"x"});
    CHECK(majority.agreement == VoteOutcome::Agreement::majority);
    CHECK(majority.winner_ids == V{"x"});

    // Split: "y" appears twice across the full lists, so it leads; the rest
    // follow in strategy order.
    auto split = majority_vote(V{"x", "y"}, V{"y"}, V{"z"});
    CHECK(split.agreement == VoteOutcome::Agreement::split);
    CHECK(split.winner_ids == V{"y", "x", "z"});
}

TEST_CASE("majority_vote handles abstentions") {
    auto two_agree = majority_vote(V{"x"}, V{}, V{"x"});
    CHECK(two_agree.agreement == VoteOutcome::Agreement::majority);
    CHECK(two_agree.winner_ids == V{"x"});

    auto lone = majority_vote(V{}, V{"y"}, V{});
    CHECK(lone.agreement == VoteOutcome::Agreement::split);
    CHECK(lone.winner_ids == V{"y"});

    CHECK_THROWS_WITH_AS(majority_vote(V{}, V{}, V{}), doctest::Contains("no votes"), DataError);
}

TEST_CASE("unanimous and majority outcomes are permutation-invariant") {
    std::array<V, 3> lists = {V{"a", "c"}, V{"a"}, V{"b", "a"}};
    std::array<int, 3> order = {0, 1, 2};
    auto base = majority_vote(lists[0], lists[1], lists[2]);
    REQUIRE(base.agreement == VoteOutcome::Agreement::majority);
    do {
        auto vote = majority_vote(lists[order[0]], lists[order[1]], lists[order[2]]);
        CHECK(vote.agreement == base.agreement);
        CHECK(vote.winner_ids == base.winner_ids);
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("build_bindings shapes per strategy") {
    Fixture fx;
    auto bat = labeled("t1", "A <WSD> bat </WSD> slept all day.", "bat.noun.0");

    SUBCASE("zero_shot_enhanced binds exactly sentence and meanings") {
        auto binding = build_bindings(StrategyId::zero_shot_enhanced, bat, fx.kb, fx.inventory,
                                      3, 5);
        REQUIRE(binding.size() == 2);
        CHECK(binding.count("sentence") == 1);
        CHECK(binding.count("meanings") == 1);
        CHECK(binding.at("meanings").find("synonyms") == std::string::npos);
    }
    SUBCASE("synonym_augmented definitions carry synonyms") {
        auto dict = labeled("t2", "Check the <WSD> dictionary </WSD> first.",
                            "dictionary.noun.0");
        auto binding = build_bindings(StrategyId::synonym_augmented, dict, fx.kb, fx.inventory,
                                      3, 5);
        CHECK(binding.at("filtered_definitions").find("(synonyms: wordbook)") !=
              std::string::npos);
        // No dictionary training examples in this fixture: sentinel applies.
        CHECK(binding.at("examples") == "No examples available.");
    }
    SUBCASE("few_shot_kb binds lemma, definitions, and capped examples") {
        auto binding = build_bindings(StrategyId::few_shot_kb, bat, fx.kb, fx.inventory, 3, 5);
        CHECK(binding.at("word") == "bat");
        CHECK(binding.at("filtered_definitions").find("bat.noun.0:") != std::string::npos);
        CHECK(binding.at("examples").find(" -> bat.noun.0") != std::string::npos);
        CHECK(binding.at("examples").find(" -> bat.noun.1") != std::string::npos);
    }
}

TEST_CASE("disambiguate few_shot_kb resolves a replayed answer") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept in the cave.", "bat.noun.0");

    TemplateSet templates = builtin_templates();
    auto binding = build_bindings(StrategyId::few_shot_kb, instance, fx.kb, fx.inventory, 3, 5);
    RenderedPrompt prompt = render(templates.at(TemplateId::optimal_kb), binding);

    CacheRecord record;
    record.key = cache_key(fx.model.model_key, prompt, fx.model.temperature, fx.model.max_tokens);
    record.response_text = R"({"word":"bat","senseIDs":["bat.noun.0"]})";
    Gateway gateway(make_replay_provider(std::vector<CacheRecord>{record}), nullptr,
                    quiet_options());

    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
    auto result = disambiguate(StrategyId::few_shot_kb, instance, ctx);
    REQUIRE(result.prediction.has_value());
    CHECK(result.prediction->sense_ids == V{"bat.noun.0"});
    CHECK(result.raw_responses.size() == 1);
    CHECK(!result.diagnostics.contains("invalid_ids"));
}

TEST_CASE("unknown lemma errors before any gateway call") {
    Fixture fx;
    auto provider = std::make_shared<ScriptedProvider>(
        [](const RenderedPrompt&) { return std::string("{}"); });
    Gateway gateway(provider, nullptr, quiet_options());
    TemplateSet templates = builtin_templates();
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};

    WsdInstance mystery;
    mystery.instance_id = "t9";
    mystery.sentence = "A <WSD> qwortix </WSD> appeared.";
    mystery.target_surface = "qwortix";
    mystery.lemma = "qwortix";
    mystery.pos = PosTag::noun;

    for (StrategyId strategy : {StrategyId::few_shot_kb, StrategyId::aspect_chain,
                                StrategyId::self_consistency}) {
        CHECK_THROWS_WITH_AS(disambiguate(strategy, mystery, ctx),
                             doctest::Contains("unknown lemma"), DataError);
    }
    CHECK(provider->attempts() == 0);
}

TEST_CASE("self-consistency recomputes the vote and logs overrides") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept in the cave.", "bat.noun.0");
    TemplateSet templates = builtin_templates();

    auto provider = std::make_shared<ScriptedProvider>([](const RenderedPrompt&) {
        return std::string(R"({"word":"bat","sense_id":"bat.noun.1",)"
                           R"("strategy_1":"bat.noun.0","strategy_2":"bat.noun.1",)"
                           R"("strategy_3":"bat.noun.0"})");
    });
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};

    auto result = disambiguate(StrategyId::self_consistency, instance, ctx);
    REQUIRE(result.prediction.has_value());
    CHECK(result.prediction->sense_ids == V{"bat.noun.0"});  // vote beats the model's field
    CHECK(result.diagnostics["agreement"] == "majority");
    CHECK(result.diagnostics["vote_overrode_model"] == true);
    CHECK(result.raw_responses.size() == 1);
}

TEST_CASE("self-consistency with no votes falls back to the model final") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept.", "bat.noun.0");
    TemplateSet templates = builtin_templates();
    auto provider = std::make_shared<ScriptedProvider>([](const RenderedPrompt&) {
        return std::string(R"({"word":"bat","sense_id":"bat.noun.1"})");
    });
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
    auto result = disambiguate(StrategyId::self_consistency, instance, ctx);
    REQUIRE(result.prediction.has_value());
    CHECK(result.prediction->sense_ids == V{"bat.noun.1"});
}

TEST_CASE("aspect chain restricts stage two to the filtered senses") {
    Fixture fx;
    auto instance = labeled("t1", "The <WSD> post </WSD> was painted white.", "post.noun.1");
    TemplateSet templates = builtin_templates();

    std::vector<std::string> seen;
    auto provider = std::make_shared<ScriptedProvider>([&](const RenderedPrompt& p) {
        seen.push_back(p.user_text);
        if (seen.size() == 1)
            return std::string(
                R"([{"sense_id":"post.noun.1","sense meaning":"a pole"},)"
                R"({"sense_id":"post.noun.2","sense meaning":"a job"}])");
        return std::string(R"({"word":"post","sense_id":"post.noun.1"})");
    });
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};

    auto result = disambiguate(StrategyId::aspect_chain, instance, ctx);
    REQUIRE(result.prediction.has_value());
    CHECK(result.prediction->sense_ids == V{"post.noun.1"});
    CHECK(result.raw_responses.size() == 2);
    CHECK(result.diagnostics["filtered_sense_count"] == 2);
    CHECK(result.diagnostics["fallback"] == false);

    REQUIRE(seen.size() == 2);
    // Stage one sees every sense; stage two only the survivors.
    CHECK(seen[0].find("post.noun.0:") != std::string::npos);
    CHECK(seen[1].find("post.noun.0:") == std::string::npos);
    CHECK(seen[1].find("post.noun.1:") != std::string::npos);
    CHECK(seen[1].find("post.noun.2:") != std::string::npos);
    // Examples are restricted too: the post.noun.0 training sentence is gone.
    CHECK(seen[1].find(" -> post.noun.0") == std::string::npos);
    CHECK(seen[1].find(" -> post.noun.1") != std::string::npos);
}

TEST_CASE("aspect chain falls back to the full sense list on stage-one trouble") {
    Fixture fx;
    auto instance = labeled("t1", "The <WSD> post </WSD> was painted white.", "post.noun.1");
    TemplateSet templates = builtin_templates();

    SUBCASE("stage one returns prose") {
        int calls = 0;
        auto provider = std::make_shared<ScriptedProvider>([&](const RenderedPrompt&) {
            return ++calls == 1 ? std::string("I cannot answer in JSON, sorry.")
                                : std::string(R"({"word":"post","sense_id":"post.noun.0"})");
        });
        Gateway gateway(provider, nullptr, quiet_options());
        StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
        auto result = disambiguate(StrategyId::aspect_chain, instance, ctx);
        REQUIRE(result.prediction.has_value());
        CHECK(result.prediction->sense_ids == V{"post.noun.0"});
        CHECK(result.diagnostics["fallback"] == true);
        CHECK(result.diagnostics["filtered_sense_count"] == 3);
    }
    SUBCASE("stage one returns only senses outside the inventory") {
        int calls = 0;
        auto provider = std::make_shared<ScriptedProvider>([&](const RenderedPrompt&) {
            return ++calls == 1
                       ? std::string(R"({"sense_id":"post.noun.9","sense meaning":"nope"})")
                       : std::string(R"({"word":"post","sense_id":"post.noun.1"})");
        });
        Gateway gateway(provider, nullptr, quiet_options());
        StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
        auto result = disambiguate(StrategyId::aspect_chain, instance, ctx);
        CHECK(result.diagnostics["fallback"] == true);
        CHECK(result.diagnostics["stage1_invalid_ids"] ==
              nlohmann::ordered_json::array({"post.noun.9"}));
    }
}

TEST_CASE("every strategy makes its fixed number of gateway calls") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept.", "bat.noun.0");
    TemplateSet templates = builtin_templates();
    // Generic response usable by every parser in the pipeline.
    const std::string generic =
        R"({"word":"bat","sense_id":"bat.noun.0","sense meaning":"m",)"
        R"("strategy_1":"bat.noun.0","strategy_2":"bat.noun.0","strategy_3":"bat.noun.0"})";

    struct Case {
        StrategyId strategy;
        int expected_calls;
    };
    for (const Case& c :
         {Case{StrategyId::zero_shot_enhanced, 1}, Case{StrategyId::few_shot_kb, 1},
          Case{StrategyId::self_consistency, 1}, Case{StrategyId::synonym_augmented, 1},
          Case{StrategyId::general_kb, 1}, Case{StrategyId::aspect_chain, 2}}) {
        auto provider = std::make_shared<ScriptedProvider>(
            [&](const RenderedPrompt&) { return generic; });
        Gateway gateway(provider, nullptr, quiet_options());
        StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
        auto result = disambiguate(c.strategy, instance, ctx);
        CHECK(provider->attempts() == c.expected_calls);
        CHECK(result.raw_responses.size() == static_cast<std::size_t>(c.expected_calls));
        REQUIRE(result.prediction.has_value());
    }
}

TEST_CASE("predicted ids outside the filtered definitions are flagged invalid") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept.", "bat.noun.0");
    TemplateSet templates = builtin_templates();
    auto provider = std::make_shared<ScriptedProvider>([](const RenderedPrompt&) {
        return std::string(R"({"word":"bat","senseIDs":["bat.noun.7","bat.noun.0"]})");
    });
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
    auto result = disambiguate(StrategyId::few_shot_kb, instance, ctx);
    REQUIRE(result.prediction.has_value());
    CHECK(result.prediction->sense_ids == V{"bat.noun.7", "bat.noun.0"});
    CHECK(result.diagnostics["invalid_ids"] == nlohmann::ordered_json::array({"bat.noun.7"}));
}

TEST_CASE("parse failures are recorded, not thrown") {
    Fixture fx;
    auto instance = labeled("t1", "A <WSD> bat </WSD> slept.", "bat.noun.0");
    TemplateSet templates = builtin_templates();
    auto provider = std::make_shared<ScriptedProvider>(
        [](const RenderedPrompt&) { return std::string("I refuse to answer."); });
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
    auto result = disambiguate(StrategyId::few_shot_kb, instance, ctx);
    CHECK(result.parse_failure());
    CHECK(!result.parse_error.empty());
    CHECK(result.raw_responses.size() == 1);
}

TEST_CASE("terminal gateway errors carry the instance id") {
    Fixture fx;
    auto instance = labeled("t42", "A <WSD> bat </WSD> slept.", "bat.noun.0");
    TemplateSet templates = builtin_templates();
    using Step = ScriptedProvider::Step;
    auto provider = std::make_shared<ScriptedProvider>(
        std::vector<Step>{{Step::Kind::terminal, "auth failure"}});
    Gateway gateway(provider, nullptr, quiet_options());
    StrategyContext ctx{fx.kb, fx.inventory, templates, fx.model, gateway, 3, 5};
    CHECK_THROWS_WITH_AS(disambiguate(StrategyId::few_shot_kb, instance, ctx),
                         doctest::Contains("t42"), ProviderTerminalError);
}
