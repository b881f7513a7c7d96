#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wsd/util.hpp"

namespace wsd {

enum class PosTag { noun, verb, adjective, adverb };

inline constexpr std::array<PosTag, 4> kAllPos = {PosTag::noun, PosTag::verb,
                                                  PosTag::adjective, PosTag::adverb};

std::string to_string(PosTag pos);
// Tolerates surrounding whitespace ("dictionary. noun.0" prints a space).
std::optional<PosTag> pos_from_string(std::string_view text);

// One sense inventory row: "dictionary.noun.0" plus gloss, synonyms, tags, depth.
struct SenseEntry {
    std::string sense_id;
    std::string lemma;
    PosTag pos = PosTag::noun;
    std::string gloss;
    std::vector<std::string> synonyms;
    std::vector<std::string> tags;
    int depth = 0;

    bool operator==(const SenseEntry&) const = default;
};

using SenseInventory = std::map<std::string, SenseEntry>;  // sense_id -> entry

struct SenseIdParts {
    std::string lemma;
    PosTag pos;
    int index;
};

// Splits "<lemma>.<pos>.<index>" into its segments; whitespace inside
// segments is trimmed before interpretation. Throws DataError otherwise.
SenseIdParts parse_sense_id(std::string_view sense_id);
PosTag pos_of_sense(std::string_view sense_id);

inline constexpr std::string_view kWsdOpen = "<WSD>";
inline constexpr std::string_view kWsdClose = "</WSD>";

// A sentence with exactly one <WSD>-marked target word.
struct WsdInstance {
    std::string instance_id;
    std::string sentence;        // contains the literal markers
    std::string target_surface;  // text between the markers, trimmed
    std::string lemma;
    PosTag pos = PosTag::noun;
    std::optional<std::string> gold_sense_id;

    bool operator==(const WsdInstance&) const = default;
};

struct Corpus {
    SenseInventory inventory;
    std::vector<WsdInstance> train;
    std::vector<WsdInstance> test;
};

// Tab-separated, one sense per line:
//   sense_id \t lemma \t gloss \t synonyms(comma-joined) \t tags(comma-joined) \t depth
std::vector<SenseEntry> parse_sense_inventory(std::istream& source);

// Labeled rows:   instance_id \t sentence \t gold_sense_id
// Unlabeled rows: instance_id \t sentence \t lemma \t pos
// Lemma and POS come from the gold sense ID when labeled, from the explicit
// columns otherwise; the surface form is never lemmatized.
std::vector<WsdInstance> parse_instances(std::istream& source, bool labeled);

// Inverse of the parsers; round-trips structurally.
void write_sense_inventory(const std::vector<SenseEntry>& entries, std::ostream& out);
void write_instances(const std::vector<WsdInstance>& instances, bool labeled,
                     std::ostream& out);

Corpus load_corpus(const std::string& inventory_path, const std::string& train_path,
                   const std::string& test_path);

struct CorpusStats {
    std::map<PosTag, std::size_t> per_pos;
    std::size_t total = 0;
};

CorpusStats corpus_stats(const std::vector<WsdInstance>& instances);
// Per spec, stats of a corpus cover its training set.
CorpusStats corpus_stats(const Corpus& corpus);

// Deterministic per-POS sampling without replacement. Output is grouped by
// POS in noun/verb/adjective/adverb order; within a group the original file
// order is kept. Throws DataError naming the POS and shortfall when a quota
// exceeds its pool.
std::vector<WsdInstance> sample_eval_set(const std::vector<WsdInstance>& test,
                                         const std::map<PosTag, std::size_t>& quotas,
                                         std::uint64_t seed);

}  // namespace wsd
