#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsd/gateway.hpp"
#include "wsd/kb.hpp"
#include "wsd/prompts.hpp"

namespace wsd {

enum class StrategyId {
    zero_shot_enhanced,
    few_shot_kb,  // the phase-2 default
    self_consistency,
    synonym_augmented,
    aspect_chain,
    general_kb,  // reconstructed phase-1 baseline: enhanced body plus examples
};

std::string to_string(StrategyId id);
std::optional<StrategyId> strategy_from_string(std::string_view text);

struct VoteOutcome {
    enum class Agreement { unanimous, majority, split };

    std::vector<std::string> winner_ids;
    Agreement agreement = Agreement::split;
    std::array<std::vector<std::string>, 3> per_strategy;
};

std::string to_string(VoteOutcome::Agreement agreement);

// Compares the top id of each non-empty list: all three equal -> unanimous;
// exactly two equal -> majority; otherwise split, with winner_ids the
// distinct top ids ordered by total occurrences across all three full lists
// (descending), then by strategy index. Throws DataError when every list is
// empty.
VoteOutcome majority_vote(const std::vector<std::string>& s1, const std::vector<std::string>& s2,
                          const std::vector<std::string>& s3);

struct DisambiguationResult {
    std::string instance_id;
    StrategyId strategy = StrategyId::few_shot_kb;
    std::optional<Prediction> prediction;  // nullopt when parsing failed
    std::string parse_error;
    std::vector<ChatResponse> raw_responses;
    nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();

    bool parse_failure() const { return !prediction.has_value(); }
};

// Shared, immutable context for a run.
struct StrategyContext {
    const KnowledgeBase& kb;
    const SenseInventory& inventory;
    const TemplateSet& templates;
    ModelSpec model;
    Gateway& gateway;
    int per_sense_cap = 3;
    std::uint64_t seed = 0;
};

// Definitions, examples, and the marked sentence for one instance. Synonyms
// are included only for synonym_augmented and aspect_chain. Throws DataError
// when the lemma has no inventory senses.
PlaceholderBinding build_bindings(StrategyId strategy, const WsdInstance& instance,
                                  const KnowledgeBase& kb, const SenseInventory& inventory,
                                  int per_sense_cap, std::uint64_t seed);

// Runs the selected pipeline for one instance. Gateway terminal errors
// propagate; a ParseFailure becomes an incorrect-scoring result instead.
DisambiguationResult disambiguate(StrategyId strategy, const WsdInstance& instance,
                                  StrategyContext& ctx);

// Two-stage pipeline: chain_filter narrows the candidate senses, chain_final
// picks one among them; parse trouble at stage one falls back to the full
// sense list (recorded in diagnostics).
DisambiguationResult run_aspect_chain(const WsdInstance& instance, StrategyContext& ctx);

}  // namespace wsd
