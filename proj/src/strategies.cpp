#include "wsd/strategies.hpp"

#include <algorithm>
#include <map>

namespace wsd {

std::string to_string(StrategyId id) {
    switch (id) {
        case StrategyId::zero_shot_enhanced: return "zero_shot_enhanced";
        case StrategyId::few_shot_kb: return "few_shot_kb";
        case StrategyId::self_consistency: return "self_consistency";
        case StrategyId::synonym_augmented: return "synonym_augmented";
        case StrategyId::aspect_chain: return "aspect_chain";
        case StrategyId::general_kb: return "general_kb";
    }
    throw std::logic_error("unreachable StrategyId");
}

std::optional<StrategyId> strategy_from_string(std::string_view text) {
    for (StrategyId id : {StrategyId::zero_shot_enhanced, StrategyId::few_shot_kb,
                          StrategyId::self_consistency, StrategyId::synonym_augmented,
                          StrategyId::aspect_chain, StrategyId::general_kb})
        if (to_string(id) == text) return id;
    return std::nullopt;
}

std::string to_string(VoteOutcome::Agreement agreement) {
    switch (agreement) {
        case VoteOutcome::Agreement::unanimous: return "unanimous";
        case VoteOutcome::Agreement::majority: return "majority";
        case VoteOutcome::Agreement::split: return "split";
    }
    throw std::logic_error("unreachable Agreement");
}

VoteOutcome majority_vote(const std::vector<std::string>& s1, const std::vector<std::string>& s2,
                          const std::vector<std::string>& s3) {
    const std::array<const std::vector<std::string>*, 3> lists = {&s1, &s2, &s3};

    std::vector<std::string> tops;  // top id per non-empty list, strategy order
    for (const auto* list : lists)
        if (!list->empty()) tops.push_back(list->front());
    if (tops.empty()) throw DataError("no votes: all three strategy lists are empty");

    VoteOutcome out;
    out.per_strategy = {s1, s2, s3};

    std::map<std::string, int> top_counts;
    for (const auto& id : tops) ++top_counts[id];

    if (tops.size() == 3 && top_counts.size() == 1) {
        out.agreement = VoteOutcome::Agreement::unanimous;
        out.winner_ids = {tops.front()};
        return out;
    }
    for (const auto& [id, count] : top_counts) {
        if (count >= 2) {
            out.agreement = VoteOutcome::Agreement::majority;
            out.winner_ids = {id};
            return out;
        }
    }

    // Split: every top is distinct. Rank by total occurrences across the
    // full lists, most frequent first; stable sort keeps strategy order on
    // ties.
    out.agreement = VoteOutcome::Agreement::split;
    std::vector<std::string> distinct;
    for (const auto& id : tops)
        if (std::find(distinct.begin(), distinct.end(), id) == distinct.end())
            distinct.push_back(id);
    auto occurrences = [&](const std::string& id) {
        long n = 0;
        for (const auto* list : lists) n += std::count(list->begin(), list->end(), id);
        return n;
    };
    std::stable_sort(distinct.begin(), distinct.end(),
                     [&](const std::string& a, const std::string& b) {
                         return occurrences(a) > occurrences(b);
                     });
    out.winner_ids = std::move(distinct);
    return out;
}

namespace {

std::uint64_t leaf_seed(std::uint64_t seed, const WsdInstance& instance) {
    return seed ^ fnv1a64(to_lower(instance.lemma) + "\x1f" + to_string(instance.pos));
}

bool wants_synonyms(StrategyId strategy) {
    return strategy == StrategyId::synonym_augmented || strategy == StrategyId::aspect_chain;
}

const PromptTemplate& template_for(StrategyId strategy, const TemplateSet& templates) {
    switch (strategy) {
        case StrategyId::zero_shot_enhanced: return templates.at(TemplateId::enhanced);
        case StrategyId::few_shot_kb: return templates.at(TemplateId::optimal_kb);
        case StrategyId::self_consistency: return templates.at(TemplateId::self_consistency);
        case StrategyId::synonym_augmented: return templates.at(TemplateId::synonym_augmented);
        case StrategyId::aspect_chain: return templates.at(TemplateId::chain_filter);
        case StrategyId::general_kb: break;  // synthesized below
    }
    throw std::logic_error("template_for: general_kb is synthesized, not shipped");
}

// Phase-1 baseline reconstruction: the enhanced body with the optimal
// prompt's examples clause appended.
PromptTemplate general_kb_template(const TemplateSet& templates) {
    PromptTemplate t = templates.at(TemplateId::enhanced);
    t.body += "\nYou can learn more on the usage of each word and the meaning through below "
              "Examples. Examples are \"{examples}\".";
    t.required_placeholders = scan_placeholders(t.body);
    return t;
}

void flag_invalid_ids(DisambiguationResult& result, const FilteredDefinitions& defs) {
    if (!result.prediction) return;
    std::vector<std::string> invalid;
    for (const auto& id : result.prediction->sense_ids) {
        bool known = std::any_of(defs.entries.begin(), defs.entries.end(),
                                 [&](const FilteredSense& s) { return s.sense_id == id; });
        if (!known) invalid.push_back(id);
    }
    if (!invalid.empty()) result.diagnostics["invalid_ids"] = invalid;
}

[[noreturn]] void rethrow_with_instance(const std::string& instance_id,
                                        const ProviderTerminalError& err) {
    throw ProviderTerminalError("instance '" + instance_id + "': " + err.what());
}

}  // namespace

PlaceholderBinding build_bindings(StrategyId strategy, const WsdInstance& instance,
                                  const KnowledgeBase& kb, const SenseInventory& inventory,
                                  int per_sense_cap, std::uint64_t seed) {
    FilteredDefinitions defs = filtered_definitions(inventory, instance.lemma, instance.pos);
    std::string defs_text = format_definitions(defs, wants_synonyms(strategy));

    PlaceholderBinding binding;
    binding["sentence"] = instance.sentence;
    switch (strategy) {
        case StrategyId::zero_shot_enhanced:
            binding["meanings"] = defs_text;
            break;
        case StrategyId::general_kb:
            binding["meanings"] = defs_text;
            binding["examples"] = format_examples(
                select_examples(kb, instance.lemma, instance.pos, per_sense_cap, seed));
            break;
        case StrategyId::few_shot_kb:
            binding["word"] = instance.lemma;
            binding["filtered_definitions"] = defs_text;
            binding["examples"] = format_examples(
                select_examples(kb, instance.lemma, instance.pos, per_sense_cap, seed));
            break;
        case StrategyId::self_consistency:
        case StrategyId::synonym_augmented:
            binding["wordwsd"] = instance.lemma;
            binding["filtered_definitions"] = defs_text;
            binding["examples"] = format_examples(
                select_examples(kb, instance.lemma, instance.pos, per_sense_cap, seed));
            break;
        case StrategyId::aspect_chain:
            // Stage-one binding; run_aspect_chain assembles stage two.
            binding["wordwsd"] = instance.lemma;
            binding["filtered_definitions"] = defs_text;
            break;
    }
    return binding;
}

DisambiguationResult disambiguate(StrategyId strategy, const WsdInstance& instance,
                                  StrategyContext& ctx) {
    if (strategy == StrategyId::aspect_chain) return run_aspect_chain(instance, ctx);

    DisambiguationResult result;
    result.instance_id = instance.instance_id;
    result.strategy = strategy;

    // Resolving the definitions first enforces the known-lemma precondition
    // before any gateway traffic.
    FilteredDefinitions defs = filtered_definitions(ctx.inventory, instance.lemma, instance.pos);
    PlaceholderBinding binding =
        build_bindings(strategy, instance, ctx.kb, ctx.inventory, ctx.per_sense_cap, ctx.seed);

    RenderedPrompt prompt = strategy == StrategyId::general_kb
                                ? render(general_kb_template(ctx.templates), binding)
                                : render(template_for(strategy, ctx.templates), binding);

    ChatResponse response;
    try {
        response = ctx.gateway.complete(ctx.model, prompt);
    } catch (const ProviderTerminalError& err) {
        rethrow_with_instance(instance.instance_id, err);
    }
    result.raw_responses.push_back(response);

    try {
        if (strategy == StrategyId::self_consistency) {
            SelfConsistencyParse sc = parse_self_consistency(response.text);
            result.diagnostics["strategy_votes"] = {sc.strategy1, sc.strategy2, sc.strategy3};
            if (sc.strategy1.empty() && sc.strategy2.empty() && sc.strategy3.empty()) {
                if (sc.final_ids.empty())
                    throw ParseFailure(
                        "self-consistency output had neither strategy votes nor a final sense id");
                result.prediction = Prediction{instance.lemma, sc.final_ids};
                result.diagnostics["vote"] = "skipped: no strategy votes, used model final";
            } else {
                VoteOutcome vote = majority_vote(sc.strategy1, sc.strategy2, sc.strategy3);
                result.prediction = Prediction{instance.lemma, vote.winner_ids};
                result.diagnostics["agreement"] = to_string(vote.agreement);
                result.diagnostics["model_final"] = sc.final_ids;
                bool overrode =
                    !sc.final_ids.empty() && sc.final_ids.front() != vote.winner_ids.front();
                result.diagnostics["vote_overrode_model"] = overrode;
            }
        } else {
            result.prediction = parse_prediction(response.text, instance.lemma);
        }
    } catch (const ParseFailure& failure) {
        result.parse_error = failure.what();
    }

    flag_invalid_ids(result, defs);
    return result;
}

DisambiguationResult run_aspect_chain(const WsdInstance& instance, StrategyContext& ctx) {
    DisambiguationResult result;
    result.instance_id = instance.instance_id;
    result.strategy = StrategyId::aspect_chain;

    FilteredDefinitions all_defs =
        filtered_definitions(ctx.inventory, instance.lemma, instance.pos);

    PlaceholderBinding stage1 = build_bindings(StrategyId::aspect_chain, instance, ctx.kb,
                                               ctx.inventory, ctx.per_sense_cap, ctx.seed);
    RenderedPrompt prompt1 = render(ctx.templates.at(TemplateId::chain_filter), stage1);
    ChatResponse response1;
    try {
        response1 = ctx.gateway.complete(ctx.model, prompt1);
    } catch (const ProviderTerminalError& err) {
        rethrow_with_instance(instance.instance_id, err);
    }
    result.raw_responses.push_back(response1);

    // Restrict the sense list to the stage-one picks that actually exist;
    // anything unusable falls back to the full list.
    bool fallback = false;
    std::vector<std::string> kept, dropped;
    try {
        auto pairs = parse_sense_filter(response1.text);
        for (const auto& [id, meaning] : pairs) {
            bool known = std::any_of(all_defs.entries.begin(), all_defs.entries.end(),
                                     [&](const FilteredSense& s) { return s.sense_id == id; });
            (known ? kept : dropped).push_back(id);
        }
    } catch (const ParseFailure& failure) {
        fallback = true;
        result.diagnostics["stage1_parse_error"] = failure.what();
    }
    if (!fallback && kept.empty()) fallback = true;

    FilteredDefinitions restricted;
    restricted.lemma = all_defs.lemma;
    if (fallback) {
        restricted = all_defs;
    } else {
        for (const auto& sense : all_defs.entries)
            if (std::find(kept.begin(), kept.end(), sense.sense_id) != kept.end())
                restricted.entries.push_back(sense);
    }
    if (!dropped.empty()) result.diagnostics["stage1_invalid_ids"] = dropped;
    result.diagnostics["fallback"] = fallback;
    result.diagnostics["filtered_sense_count"] = restricted.entries.size();

    auto leaf = lookup(ctx.kb, instance.lemma, instance.pos);
    std::vector<ExampleRef> pool;
    for (const auto& example : leaf) {
        bool allowed = fallback || std::any_of(restricted.entries.begin(),
                                               restricted.entries.end(),
                                               [&](const FilteredSense& s) {
                                                   return s.sense_id == example.sense_id;
                                               });
        if (allowed) pool.push_back(example);
    }
    std::vector<ExampleRef> examples =
        select_capped(pool, ctx.per_sense_cap, leaf_seed(ctx.seed, instance));

    PlaceholderBinding stage2;
    stage2["wordwsd"] = instance.lemma;
    stage2["definitions"] = format_definitions(restricted, /*include_synonyms=*/true);
    stage2["examples"] = format_examples(examples);
    stage2["sentence"] = instance.sentence;
    RenderedPrompt prompt2 = render(ctx.templates.at(TemplateId::chain_final), stage2);
    ChatResponse response2;
    try {
        response2 = ctx.gateway.complete(ctx.model, prompt2);
    } catch (const ProviderTerminalError& err) {
        rethrow_with_instance(instance.instance_id, err);
    }
    result.raw_responses.push_back(response2);

    try {
        result.prediction = parse_prediction(response2.text, instance.lemma);
    } catch (const ParseFailure& failure) {
        result.parse_error = failure.what();
    }

    flag_invalid_ids(result, all_defs);
    return result;
}

}  // namespace wsd
