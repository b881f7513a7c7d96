#include "wsd/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace wsd {

namespace {

// Template bodies as published, sentence order and wording preserved
// (including the source's uneven step numbering and phrasing).

constexpr const char* kEnhancedBody =
    R"(You are going to identify the sense tag of an ambiguity word in English.
Do the following tasks.
1. Examine the sentence below. "{sentence}".
2. Identify the meaning of the word enclosed within the <WSD> tags. You need to consider the total sentence before you get the exact meaning of the word.
3. Based on the identified meaning, try to find the most appropriate senseIDs from the below. "{meanings}".
4. If you have more than one senseIDs identified, you can return the senseIDs in order of confidence level.
5. Return a proper JSON object that contains the ambiguity word and the finalized senseIDs.
Use the following format for the output.
<JSON object that contain ambiguity word and the finalized senseIDs>)";

constexpr const char* kOptimalKbBody =
    R"(You are going to identify the corresponding sense tag of an ambiguity word in English sentences. Do the following tasks.
{word} has different meanings. Below are possible meanings. Comprehend the sense tags and meanings. {filtered_definitions}
You can learn more on the usage of each word and the meaning through below Examples. Examples are "{examples}".
Now examine the sentence below. You are going to identify the most suitable meaning for ambiguity word. "{sentence}"
Try to identify the meaning of the word in the above sentence which is enclosed with the <WSD>. You can think of the real meaning of sentence and decide the most suitable meaning for the word.
Based on the identified meaning, try to find the most appropriate senseIDs from the below. You are given definition of each sense tag too. "{filtered_definitions}".
If you have more than one senseIDs identified after above steps, you can return the senseIDs in order of confidence level.
Return JSON object that contains the ambiguity word and the finalized senseIDs.
Use the following format for the output.
<JSON Object with ambiguity word and the finalized senseIDs >)";

constexpr const char* kSelfConsistencyBody =
    R"(You are going to identify the corresponding sense tag of an ambiguous word in English sentences. Use multiple reasoning strategies to increase confidence in your answer.
1. The word "{wordwsd}" has different meanings. Below are possible meanings. Comprehend the sense tags and meanings: {filtered_definitions}
2. You can learn more on the usage of each word and the meaning through the examples below. Each sentence is followed by its corresponding sense id. "{examples}"
3. Now carefully examine the sentence below. The ambiguous word is enclosed within <WSD>."{sentence}"
4. Analyze the sentence using the following three approaches. For each approach, identify the meaning of the ambiguous word and the corresponding sense IDs. If there are multiple sense IDs, separate them with commas.
Strategy 1: Focus on keywords in the sentence surrounding the ambiguous word. See which sense definition aligns best with these keywords.
Strategy 2: Consider the part of speech (noun, verb, adjective, etc.) of the ambiguous word in the sentence and how it functions within the sentence structure. Choose the sense definition that fits this grammatical role.
Strategy 3: Think about the overall topic and intent of the sentence. Decide on the sense of the word that makes the most logical sense within the wider context.
5. Compare the sense ID(s) identified by each strategy.
If all three strategies agree on the same sense ID, that is your most confident answer.
If two strategies agree on a same sense ID, that becomes your answer.
If there is a disagreement, list the sense ID(s) from each strategy for further review.
6. Return a JSON object containing the following:
 - "word": The ambiguous word
 - "sense_id": The sense ID(s) determined as most likely based on the majority vote
 - "strategy_1": Sense ID(s) suggested by Strategy 1
 - "strategy_2": Sense ID(s) suggested by Strategy 2
 - "strategy_3": Sense ID(s) suggested by Strategy 3)";

constexpr const char* kSynonymAugmentedBody =
    R"(You are going to identify the corresponding sense tag of an ambiguous word in English sentences. Use multiple reasoning strategies to increase confidence in your answer.
1. The word "{wordwsd}" has different meanings. Below are possible meanings. Comprehend the sense tags and meanings. Synonyms are provided if available. {filtered_definitions}
2. You can learn more on the usage of each word and the its sense through the examples below. Each sentence is followed by its corresponding sense id. "{examples}"
3. Now carefully examine the sentence below. The ambiguous word is enclosed within <WSD>."{sentence}"
4. Analyze the sentence using the following techniques and identify the meaning of the ambiguous word.
Focus on keywords in the sentence surrounding the ambiguous word.
Think about the overall topic and intent of the sentence. Decide on the sense of the word that makes the most logical sense within the context.
5. Based on the identified meaning, try to find the most appropriate senseIDs from the below sense tag list. You are given definition of each sense tag too."{filtered_definitions}"
6. If you have more than one senseIDs identified after above steps, you can return the senseIDs in order of confident level, follow the given format to return the value.
7. Return a JSON object containing the following:
"word": The ambiguous word, "sense_id": The sense ID(s)')";

constexpr const char* kChainFilterBody =
    R"(You are going to identify the corresponding sense tags of an ambiguous word in English sentences. Use multiple reasoning strategies to increase confidence in your answer.
1. The word "{wordwsd}" has different meanings. Below are possible meanings. Comprehend the sense tags and meanings. Synonyms are provided if available. {filtered_definitions}
2. Now carefully examine the sentence below. The ambiguous word is enclosed within <WSD>."{sentence}"
4. Analyze the sentence using the following techniques and identify the appropriate sense tags of the ambiguous word.
-Focus the aspect discussed in the above sentence and filter the relevant sense tags.
-Think about the overall topic and intent of the sentence. Decide on the sense tags of the word that makes the most logical sense within the context.
5. Now you can return all sense IDS identified by the above steps.
7. Return a JSON object containing the following:
<"sense_id": The sense ID(s), "sense meaning": Summarized Sense meaning >)";

constexpr const char* kChainFinalBody =
    R"(You are going to identify the corresponding sense tag of an ambiguous word in English sentences.
1. The word "{wordwsd}" has different meanings. Below are possible meanings. Comprehend the sense tags and meanings. {definitions}
2. You can learn more on the usage of each word and its sense through the examples below if provided. Only focus on the sentences with above sense tags. You can discard sentences with different sense tags. Each sentence is followed by its corresponding sense id. "{examples}"
3. Now carefully examine the sentence below. The ambiguous word is enclosed within <WSD>."{sentence}"
4. Analyze the sentence using the "keywords surrounding the ambiguous word" and the "overall topic and meaning of the sentence" and identify the meaning of the ambiguous word.
5. Based on the identified meaning, try to find the most appropriate senseID (only one) from the below sense tag list. You are given definition of each sense tag too."{definitions}"
6. Return a JSON object containing the following:
"word": The ambiguous word, "sense_id": The sense ID)";

bool is_placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

std::string normalize_newlines(std::string text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            out += '\n';
        } else {
            out += text[i];
        }
    }
    return out;
}

PromptTemplate make_template(TemplateId id, const char* body) {
    PromptTemplate t;
    t.id = id;
    t.body = body;
    t.required_placeholders = scan_placeholders(t.body);
    return t;
}

}  // namespace

std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::enhanced: return "enhanced";
        case TemplateId::optimal_kb: return "optimal_kb";
        case TemplateId::self_consistency: return "self_consistency";
        case TemplateId::synonym_augmented: return "synonym_augmented";
        case TemplateId::chain_filter: return "chain_filter";
        case TemplateId::chain_final: return "chain_final";
    }
    throw std::logic_error("unreachable TemplateId");
}

std::optional<TemplateId> template_id_from_string(std::string_view text) {
    for (TemplateId id : {TemplateId::enhanced, TemplateId::optimal_kb,
                          TemplateId::self_consistency, TemplateId::synonym_augmented,
                          TemplateId::chain_filter, TemplateId::chain_final})
        if (to_string(id) == text) return id;
    return std::nullopt;
}

std::set<std::string> scan_placeholders(std::string_view body) {
    std::set<std::string> names;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        while (j < body.size() && is_placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            names.emplace(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return names;
}

const TemplateSet& builtin_templates() {
    static const TemplateSet templates = [] {
        TemplateSet t;
        t.emplace(TemplateId::enhanced, make_template(TemplateId::enhanced, kEnhancedBody));
        t.emplace(TemplateId::optimal_kb, make_template(TemplateId::optimal_kb, kOptimalKbBody));
        t.emplace(TemplateId::self_consistency,
                  make_template(TemplateId::self_consistency, kSelfConsistencyBody));
        t.emplace(TemplateId::synonym_augmented,
                  make_template(TemplateId::synonym_augmented, kSynonymAugmentedBody));
        t.emplace(TemplateId::chain_filter,
                  make_template(TemplateId::chain_filter, kChainFilterBody));
        t.emplace(TemplateId::chain_final,
                  make_template(TemplateId::chain_final, kChainFinalBody));
        return t;
    }();
    return templates;
}

TemplateSet load_templates(const std::optional<std::string>& override_dir,
                           std::set<TemplateId>* overridden) {
    TemplateSet templates = builtin_templates();
    if (!override_dir) return templates;
    if (!std::filesystem::is_directory(*override_dir))
        throw ConfigError("template override directory does not exist: " + *override_dir);
    for (auto& [id, tmpl] : templates) {
        std::filesystem::path p = std::filesystem::path(*override_dir) / (to_string(id) + ".txt");
        if (!std::filesystem::exists(p)) continue;
        std::ifstream in(p);
        if (!in) throw ConfigError("cannot read template override: " + p.string());
        std::stringstream buf;
        buf << in.rdbuf();
        std::string body = normalize_newlines(buf.str());
        while (!body.empty() && body.back() == '\n') body.pop_back();
        tmpl.body = std::move(body);
        tmpl.required_placeholders = scan_placeholders(tmpl.body);
        if (overridden) overridden->insert(id);
    }
    return templates;
}

RenderedPrompt render(const PromptTemplate& tmpl, const PlaceholderBinding& binding) {
    for (const auto& name : tmpl.required_placeholders)
        if (!binding.count(name))
            throw ConfigError("missing placeholder: " + name + " (template " +
                              to_string(tmpl.id) + ")");
    for (const auto& [key, value] : binding)
        if (!tmpl.required_placeholders.count(key))
            throw ConfigError("unexpected placeholder key: " + key + " (template " +
                              to_string(tmpl.id) + ")");

    const std::string& body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                std::string name = body.substr(i + 1, j - i - 1);
                auto it = binding.find(name);
                if (it != binding.end()) {
                    out += it->second;
                    i = j;
                    continue;
                }
            }
        }
        out += body[i];
    }
    return RenderedPrompt{std::string(kSystemRole), std::move(out)};
}

std::string format_definitions(const FilteredDefinitions& defs, bool include_synonyms) {
    if (defs.entries.empty())
        throw DataError("cannot format an empty definitions bundle for lemma '" + defs.lemma +
                        "'");
    std::string out;
    for (size_t i = 0; i < defs.entries.size(); ++i) {
        const auto& sense = defs.entries[i];
        if (i) out += '\n';
        out += sense.sense_id;
        out += ": ";
        out += sense.gloss;
        if (include_synonyms && !sense.synonyms.empty()) {
            out += " (synonyms: ";
            out += join(sense.synonyms, ", ");
            out += ")";
        }
    }
    return out;
}

std::string format_examples(std::span<const ExampleRef> examples) {
    if (examples.empty()) return "No examples available.";
    std::string out;
    for (size_t i = 0; i < examples.size(); ++i) {
        if (i) out += '\n';
        out += examples[i].sentence;
        out += " -> ";
        out += examples[i].sense_id;
    }
    return out;
}

}  // namespace wsd
