#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsd/corpus.hpp"

namespace wsd {

// One stored training example at a trie leaf.
struct ExampleRef {
    std::string instance_id;
    std::string sentence;  // contains <WSD> markers
    std::string sense_id;

    bool operator==(const ExampleRef&) const = default;
};

struct LookupProbe {
    int map_accesses = 0;
};

// Trie of training examples: lemma (lowercased) -> POS -> leaf list in
// training-file order. Immutable after build/load; concurrent reads are safe.
class KnowledgeBase {
public:
    using PosLeaves = std::map<PosTag, std::vector<ExampleRef>>;
    using Root = std::unordered_map<std::string, PosLeaves>;

    KnowledgeBase() = default;
    explicit KnowledgeBase(Root root) : root_(std::move(root)) {}

    const Root& root() const { return root_; }
    bool empty() const { return root_.empty(); }
    std::size_t example_count() const;

    bool operator==(const KnowledgeBase&) const = default;

private:
    Root root_;
};

inline constexpr int kKbSchemaVersion = 1;

// Every instance must be labeled; its gold sense id becomes the leaf entry.
KnowledgeBase build_kb(const std::vector<WsdInstance>& train);

// Exactly the leaf list for (lowercased lemma, pos), in insertion order;
// empty when the path is absent. The probe, when given, counts map accesses
// so the two-step traversal bound is checkable.
std::span<const ExampleRef> lookup(const KnowledgeBase& kb, std::string_view lemma, PosTag pos,
                                   LookupProbe* probe = nullptr);

// At most `per_sense_cap` examples per distinct sense id, grouped by sense id
// in first-appearance order; selection within a group is seeded sampling
// without replacement, keeping insertion order among the picks.
std::vector<ExampleRef> select_examples(const KnowledgeBase& kb, std::string_view lemma,
                                        PosTag pos, int per_sense_cap, std::uint64_t seed);

// Same capping rule over an explicit pool (used when a chain stage restricts
// the candidate senses first).
std::vector<ExampleRef> select_capped(std::span<const ExampleRef> pool, int per_sense_cap,
                                      std::uint64_t seed);

struct FilteredSense {
    std::string sense_id;
    std::string gloss;
    std::vector<std::string> synonyms;

    bool operator==(const FilteredSense&) const = default;
};

// The sense-definition bundle rendered into prompts.
struct FilteredDefinitions {
    std::string lemma;
    std::vector<FilteredSense> entries;  // ordered by sense index ascending
};

// All inventory entries for the lemma (case-insensitive), optionally POS
// restricted, ordered by sense index. Throws DataError("unknown lemma ...")
// when nothing matches.
FilteredDefinitions filtered_definitions(const SenseInventory& inventory,
                                         std::string_view lemma,
                                         std::optional<PosTag> pos = std::nullopt);

// JSON persistence:
// { "schema_version": 1, "entries": { "<lemma>": { "<pos>": [ {...}, ... ] } } }
void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);

}  // namespace wsd
