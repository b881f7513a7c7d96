#include "wsd/kb.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace wsd {

std::size_t KnowledgeBase::example_count() const {
    std::size_t n = 0;
    for (const auto& [lemma, by_pos] : root_)
        for (const auto& [pos, leaf] : by_pos) n += leaf.size();
    return n;
}

KnowledgeBase build_kb(const std::vector<WsdInstance>& train) {
    KnowledgeBase::Root root;
    for (const auto& inst : train) {
        if (!inst.gold_sense_id)
            throw DataError("instance '" + inst.instance_id +
                            "' is unlabeled; the knowledge base is built from labeled "
                            "training data");
        ExampleRef ref{inst.instance_id, inst.sentence, *inst.gold_sense_id};
        root[to_lower(inst.lemma)][inst.pos].push_back(std::move(ref));
    }
    return KnowledgeBase(std::move(root));
}

std::span<const ExampleRef> lookup(const KnowledgeBase& kb, std::string_view lemma, PosTag pos,
                                   LookupProbe* probe) {
    const auto& root = kb.root();
    auto lemma_it = root.find(to_lower(lemma));
    if (probe) ++probe->map_accesses;
    if (lemma_it == root.end()) return {};
    auto pos_it = lemma_it->second.find(pos);
    if (probe) ++probe->map_accesses;
    if (pos_it == lemma_it->second.end()) return {};
    return pos_it->second;
}

std::vector<ExampleRef> select_capped(std::span<const ExampleRef> pool, int per_sense_cap,
                                      std::uint64_t seed) {
    if (per_sense_cap < 1) throw ConfigError("per_sense_cap must be >= 1");

    std::vector<std::string> sense_order;  // first-appearance order
    std::map<std::string, std::vector<std::size_t>> groups;  // sense_id -> pool indices
    for (std::size_t i = 0; i < pool.size(); ++i) {
        auto [it, inserted] = groups.emplace(pool[i].sense_id, std::vector<std::size_t>{});
        if (inserted) sense_order.push_back(pool[i].sense_id);
        it->second.push_back(i);
    }

    std::vector<ExampleRef> out;
    SplitMix64 rng(seed);
    const auto cap = static_cast<std::size_t>(per_sense_cap);
    for (const auto& sense : sense_order) {
        auto& indices = groups[sense];
        if (indices.size() > cap) {
            for (std::size_t i = 0; i < cap; ++i) {
                std::size_t j = i + rng.bounded(indices.size() - i);
                std::swap(indices[i], indices[j]);
            }
            indices.resize(cap);
            std::sort(indices.begin(), indices.end());
        }
        for (std::size_t idx : indices) out.push_back(pool[idx]);
    }
    return out;
}

std::vector<ExampleRef> select_examples(const KnowledgeBase& kb, std::string_view lemma,
                                        PosTag pos, int per_sense_cap, std::uint64_t seed) {
    auto leaf = lookup(kb, lemma, pos);
    // Mix the path into the seed so distinct leaves draw distinct patterns
    // while staying reproducible for a fixed (inputs, seed) pair.
    std::uint64_t mixed =
        seed ^ fnv1a64(to_lower(lemma) + "\x1f" + to_string(pos));
    return select_capped(leaf, per_sense_cap, mixed);
}

FilteredDefinitions filtered_definitions(const SenseInventory& inventory,
                                         std::string_view lemma, std::optional<PosTag> pos) {
    std::string needle = to_lower(trim(lemma));
    struct Row {
        int index;
        PosTag pos;
        const SenseEntry* entry;
    };
    std::vector<Row> rows;
    for (const auto& [id, entry] : inventory) {
        if (to_lower(entry.lemma) != needle) continue;
        if (pos && entry.pos != *pos) continue;
        rows.push_back(Row{parse_sense_id(id).index, entry.pos, &entry});
    }
    if (rows.empty()) {
        std::string what = "unknown lemma '" + std::string(lemma) + "'";
        if (pos) what += " for POS " + to_string(*pos);
        throw DataError(what + ": no matching senses in the inventory");
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.index != b.index) return a.index < b.index;
        return a.pos < b.pos;
    });

    FilteredDefinitions defs;
    defs.lemma = std::string(lemma);
    for (const auto& row : rows)
        defs.entries.push_back(
            FilteredSense{row.entry->sense_id, row.entry->gloss, row.entry->synonyms});
    return defs;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [lemma, by_pos] : kb.root()) {
        nlohmann::json pos_obj = nlohmann::json::object();
        for (const auto& [pos, leaf] : by_pos) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& ref : leaf)
                arr.push_back({{"instance_id", ref.instance_id},
                               {"sentence", ref.sentence},
                               {"sense_id", ref.sense_id}});
            pos_obj[to_string(pos)] = std::move(arr);
        }
        entries[lemma] = std::move(pos_obj);
    }
    nlohmann::json doc = {{"schema_version", kKbSchemaVersion}, {"entries", std::move(entries)}};

    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw DataError("cannot open KB file for writing: " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("failed writing KB file: " + path);
}

KnowledgeBase load_kb(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open KB file: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw DataError("KB file is not valid JSON: " + path +
                        " (expected a document with schema_version " +
                        std::to_string(kKbSchemaVersion) + ")");
    if (!doc.is_object() || !doc.contains("schema_version") ||
        !doc["schema_version"].is_number_integer())
        throw DataError("KB file " + path + " has no integer schema_version field");
    int version = doc["schema_version"].get<int>();
    if (version != kKbSchemaVersion)
        throw DataError("KB file " + path + " has schema_version " + std::to_string(version) +
                        "; this build reads version " + std::to_string(kKbSchemaVersion));
    if (!doc.contains("entries") || !doc["entries"].is_object())
        throw DataError("KB file " + path + " has no 'entries' object");

    KnowledgeBase::Root root;
    for (const auto& [lemma, pos_obj] : doc["entries"].items()) {
        if (!pos_obj.is_object())
            throw DataError("KB file " + path + ": entry '" + lemma + "' is not an object");
        KnowledgeBase::PosLeaves leaves;
        for (const auto& [pos_text, arr] : pos_obj.items()) {
            auto pos = pos_from_string(pos_text);
            if (!pos)
                throw DataError("KB file " + path + ": entry '" + lemma +
                                "' has invalid POS key '" + pos_text + "'");
            if (!arr.is_array())
                throw DataError("KB file " + path + ": leaf for '" + lemma + "'/" + pos_text +
                                " is not an array");
            std::vector<ExampleRef> leaf;
            for (const auto& item : arr) {
                if (!item.is_object() || !item.contains("instance_id") ||
                    !item.contains("sentence") || !item.contains("sense_id"))
                    throw DataError("KB file " + path + ": malformed example under '" + lemma +
                                    "'/" + pos_text);
                ExampleRef ref{item["instance_id"].get<std::string>(),
                               item["sentence"].get<std::string>(),
                               item["sense_id"].get<std::string>()};
                // Leaf entries must sit on their own (lemma, POS) path.
                SenseIdParts parts = parse_sense_id(ref.sense_id);
                if (to_lower(parts.lemma) != to_lower(lemma) || parts.pos != *pos)
                    throw DataError("KB file " + path + ": example '" + ref.instance_id +
                                    "' has sense id '" + ref.sense_id +
                                    "' outside its trie path '" + lemma + "'/" + pos_text);
                leaf.push_back(std::move(ref));
            }
            leaves.emplace(*pos, std::move(leaf));
        }
        root.emplace(lemma, std::move(leaves));
    }
    return KnowledgeBase(std::move(root));
}

}  // namespace wsd
