#include "wsd/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace wsd {

namespace {

std::string read_line_strip_cr(std::istream& in, std::string& line) {
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

[[noreturn]] void line_error(size_t line_no, const std::string& what) {
    std::ostringstream os;
    os << "line " << line_no << ": " << what;
    throw DataError(os.str());
}

int parse_nonnegative_int(std::string_view text, size_t line_no, const char* field) {
    std::string t = trim(text);
    int value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || value < 0)
        line_error(line_no, std::string("field '") + field + "' is not a non-negative integer: '" +
                                t + "'");
    return value;
}

}  // namespace

std::string to_string(PosTag pos) {
    switch (pos) {
        case PosTag::noun: return "noun";
        case PosTag::verb: return "verb";
        case PosTag::adjective: return "adjective";
        case PosTag::adverb: return "adverb";
    }
    throw std::logic_error("unreachable PosTag");
}

std::optional<PosTag> pos_from_string(std::string_view text) {
    std::string t = to_lower(trim(text));
    if (t == "noun") return PosTag::noun;
    if (t == "verb") return PosTag::verb;
    if (t == "adjective") return PosTag::adjective;
    if (t == "adverb") return PosTag::adverb;
    return std::nullopt;
}

SenseIdParts parse_sense_id(std::string_view sense_id) {
    auto segments = split(sense_id, '.');
    if (segments.size() != 3)
        throw DataError("sense id '" + std::string(sense_id) +
                        "' does not have exactly three dot-separated segments");
    std::string lemma = trim(segments[0]);
    if (lemma.empty())
        throw DataError("sense id '" + std::string(sense_id) + "' has an empty lemma segment");
    auto pos = pos_from_string(segments[1]);
    if (!pos)
        throw DataError("sense id '" + std::string(sense_id) + "' has an invalid POS segment '" +
                        trim(segments[1]) + "'");
    std::string idx = trim(segments[2]);
    int index = 0;
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
    if (ec != std::errc{} || ptr != idx.data() + idx.size() || index < 0)
        throw DataError("sense id '" + std::string(sense_id) +
                        "' has an invalid index segment '" + idx + "'");
    return SenseIdParts{std::move(lemma), *pos, index};
}

PosTag pos_of_sense(std::string_view sense_id) { return parse_sense_id(sense_id).pos; }

std::vector<SenseEntry> parse_sense_inventory(std::istream& source) {
    std::vector<SenseEntry> entries;
    std::map<std::string, size_t> seen;  // sense_id -> line
    std::string line;
    size_t line_no = 0;
    while (source.good()) {
        read_line_strip_cr(source, line);
        if (source.fail() && line.empty()) break;
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 6)
            line_error(line_no, "expected 6 tab-separated fields (sense_id, lemma, gloss, "
                                "synonyms, tags, depth), got " +
                                    std::to_string(fields.size()));
        SenseEntry e;
        e.sense_id = trim(fields[0]);
        SenseIdParts parts;
        try {
            parts = parse_sense_id(e.sense_id);
        } catch (const DataError& err) {
            line_error(line_no, std::string("field 'sense_id': ") + err.what());
        }
        e.lemma = trim(fields[1]);
        if (e.lemma != parts.lemma)
            line_error(line_no, "field 'lemma' ('" + e.lemma +
                                    "') does not equal the first sense_id segment ('" +
                                    parts.lemma + "')");
        e.pos = parts.pos;
        e.gloss = trim(fields[2]);
        e.synonyms = split_list(fields[3]);
        e.tags = split_list(fields[4]);
        e.depth = parse_nonnegative_int(fields[5], line_no, "depth");

        auto [it, inserted] = seen.emplace(e.sense_id, line_no);
        if (!inserted)
            line_error(line_no, "duplicate sense_id '" + e.sense_id + "' (first seen on line " +
                                    std::to_string(it->second) + ")");
        entries.push_back(std::move(e));
    }
    return entries;
}

namespace {

struct MarkerSpan {
    size_t open_pos;
    size_t close_pos;
};

MarkerSpan find_single_marker_pair(const std::string& sentence, size_t line_no) {
    size_t open1 = sentence.find(kWsdOpen);
    if (open1 == std::string::npos) line_error(line_no, "sentence has no <WSD> marker");
    if (sentence.find(kWsdOpen, open1 + kWsdOpen.size()) != std::string::npos)
        line_error(line_no, "sentence has more than one <WSD> marker");
    size_t close1 = sentence.find(kWsdClose);
    if (close1 == std::string::npos) line_error(line_no, "sentence has no </WSD> marker");
    if (sentence.find(kWsdClose, close1 + kWsdClose.size()) != std::string::npos)
        line_error(line_no, "sentence has more than one </WSD> marker");
    if (close1 < open1) line_error(line_no, "</WSD> appears before <WSD>");
    return MarkerSpan{open1, close1};
}

}  // namespace

std::vector<WsdInstance> parse_instances(std::istream& source, bool labeled) {
    std::vector<WsdInstance> out;
    std::string line;
    size_t line_no = 0;
    while (source.good()) {
        read_line_strip_cr(source, line);
        if (source.fail() && line.empty()) break;
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line, '\t');
        size_t expected = labeled ? 3 : 4;
        if (fields.size() != expected)
            line_error(line_no, std::string("expected ") + std::to_string(expected) +
                                    (labeled ? " tab-separated fields (instance_id, sentence, "
                                               "gold_sense_id), got "
                                             : " tab-separated fields (instance_id, sentence, "
                                               "lemma, pos), got ") +
                                    std::to_string(fields.size()));
        WsdInstance inst;
        inst.instance_id = trim(fields[0]);
        if (inst.instance_id.empty()) line_error(line_no, "empty instance_id");
        inst.sentence = fields[1];
        auto span = find_single_marker_pair(inst.sentence, line_no);
        inst.target_surface = trim(std::string_view(inst.sentence)
                                       .substr(span.open_pos + kWsdOpen.size(),
                                               span.close_pos - span.open_pos - kWsdOpen.size()));
        if (labeled) {
            std::string gold = trim(fields[2]);
            if (gold.empty()) line_error(line_no, "labeled record missing gold sense id");
            SenseIdParts parts;
            try {
                parts = parse_sense_id(gold);
            } catch (const DataError& err) {
                line_error(line_no, std::string("field 'gold_sense_id': ") + err.what());
            }
            inst.lemma = parts.lemma;
            inst.pos = parts.pos;
            inst.gold_sense_id = std::move(gold);
        } else {
            inst.lemma = trim(fields[2]);
            if (inst.lemma.empty()) line_error(line_no, "empty lemma field");
            auto pos = pos_from_string(fields[3]);
            if (!pos) line_error(line_no, "invalid POS field '" + trim(fields[3]) + "'");
            inst.pos = *pos;
        }
        out.push_back(std::move(inst));
    }
    return out;
}

namespace {

void check_no_tabs(const std::string& value, const char* field) {
    if (value.find('\t') != std::string::npos)
        throw DataError(std::string("field '") + field + "' contains a tab; not representable "
                                                         "in the tab-separated format");
}

}  // namespace

void write_sense_inventory(const std::vector<SenseEntry>& entries, std::ostream& out) {
    for (const auto& e : entries) {
        check_no_tabs(e.sense_id, "sense_id");
        check_no_tabs(e.gloss, "gloss");
        out << e.sense_id << '\t' << e.lemma << '\t' << e.gloss << '\t'
            << join(e.synonyms, ",") << '\t' << join(e.tags, ",") << '\t' << e.depth << '\n';
    }
}

void write_instances(const std::vector<WsdInstance>& instances, bool labeled,
                     std::ostream& out) {
    for (const auto& inst : instances) {
        check_no_tabs(inst.sentence, "sentence");
        if (labeled) {
            if (!inst.gold_sense_id)
                throw DataError("instance '" + inst.instance_id +
                                "' has no gold sense id but a labeled file was requested");
            out << inst.instance_id << '\t' << inst.sentence << '\t' << *inst.gold_sense_id
                << '\n';
        } else {
            out << inst.instance_id << '\t' << inst.sentence << '\t' << inst.lemma << '\t'
                << to_string(inst.pos) << '\n';
        }
    }
}

namespace {

std::vector<WsdInstance> parse_instance_file(const std::string& path, bool labeled) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open instance file: " + path);
    try {
        return parse_instances(in, labeled);
    } catch (const DataError& err) {
        throw DataError(path + ": " + err.what());
    }
}

}  // namespace

Corpus load_corpus(const std::string& inventory_path, const std::string& train_path,
                   const std::string& test_path) {
    Corpus corpus;
    {
        std::ifstream in(inventory_path);
        if (!in) throw DataError("cannot open inventory file: " + inventory_path);
        std::vector<SenseEntry> entries;
        try {
            entries = parse_sense_inventory(in);
        } catch (const DataError& err) {
            throw DataError(inventory_path + ": " + err.what());
        }
        for (auto& e : entries) {
            std::string id = e.sense_id;
            corpus.inventory.emplace(std::move(id), std::move(e));
        }
    }
    corpus.train = parse_instance_file(train_path, /*labeled=*/true);
    corpus.test = parse_instance_file(test_path, /*labeled=*/true);

    auto check_gold = [&](const std::vector<WsdInstance>& instances, const std::string& path) {
        for (const auto& inst : instances) {
            if (inst.gold_sense_id && !corpus.inventory.count(*inst.gold_sense_id))
                throw DataError(path + ": instance '" + inst.instance_id +
                                "' has gold sense id '" + *inst.gold_sense_id +
                                "' not present in the inventory");
        }
    };
    check_gold(corpus.train, train_path);
    check_gold(corpus.test, test_path);
    return corpus;
}

CorpusStats corpus_stats(const std::vector<WsdInstance>& instances) {
    CorpusStats stats;
    for (PosTag pos : kAllPos) stats.per_pos[pos] = 0;
    for (const auto& inst : instances) ++stats.per_pos[inst.pos];
    stats.total = instances.size();
    return stats;
}

CorpusStats corpus_stats(const Corpus& corpus) { return corpus_stats(corpus.train); }

std::vector<WsdInstance> sample_eval_set(const std::vector<WsdInstance>& test,
                                         const std::map<PosTag, std::size_t>& quotas,
                                         std::uint64_t seed) {
    std::map<PosTag, std::vector<size_t>> pools;
    for (size_t i = 0; i < test.size(); ++i) pools[test[i].pos].push_back(i);

    std::vector<WsdInstance> out;
    SplitMix64 rng(seed);
    for (PosTag pos : kAllPos) {
        auto qit = quotas.find(pos);
        std::size_t quota = qit == quotas.end() ? 0 : qit->second;
        auto& pool = pools[pos];
        if (quota > pool.size()) {
            std::ostringstream os;
            os << "insufficient " << to_string(pos) << " instances: quota " << quota
               << ", available " << pool.size() << " (short by " << quota - pool.size() << ")";
            throw DataError(os.str());
        }
        // Partial Fisher-Yates over the pool, then restore file order.
        for (std::size_t i = 0; i < quota; ++i) {
            std::size_t j = i + rng.bounded(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        std::vector<size_t> chosen(pool.begin(), pool.begin() + quota);
        std::sort(chosen.begin(), chosen.end());
        for (size_t idx : chosen) out.push_back(test[idx]);
    }
    return out;
}

}  // namespace wsd
