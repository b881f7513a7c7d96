#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "wsd/kb.hpp"

namespace wsd {

enum class TemplateId {
    enhanced,
    optimal_kb,
    self_consistency,
    synonym_augmented,
    chain_filter,
    chain_final,
};

std::string to_string(TemplateId id);
std::optional<TemplateId> template_id_from_string(std::string_view text);

struct PromptTemplate {
    TemplateId id = TemplateId::enhanced;
    std::string body;                               // '\n' line endings, {name} placeholders
    std::set<std::string> required_placeholders;    // exactly the names occurring in body
};

using TemplateSet = std::map<TemplateId, PromptTemplate>;
using PlaceholderBinding = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::string system_text;
    std::string user_text;

    bool operator==(const RenderedPrompt&) const = default;
};

// The fixed role sentence sent as the system message.
inline constexpr std::string_view kSystemRole =
    "You are a helpful assistant for identifying word senses.";

// The six shipped templates. Bodies are embedded resources; placeholder sets:
//   enhanced            {sentence, meanings}
//   optimal_kb          {word, filtered_definitions, examples, sentence}
//   self_consistency    {wordwsd, filtered_definitions, examples, sentence}
//   synonym_augmented   {wordwsd, filtered_definitions, examples, sentence}
//   chain_filter        {wordwsd, filtered_definitions, sentence}
//   chain_final         {wordwsd, definitions, examples, sentence}
const TemplateSet& builtin_templates();

// Builtins with per-template overrides read from `dir/<template_id>.txt`
// (line endings normalized to '\n'). Which ids were overridden is reported
// so runs can record it.
TemplateSet load_templates(const std::optional<std::string>& override_dir,
                           std::set<TemplateId>* overridden = nullptr);

// Extracts the placeholder names occurring in a body.
std::set<std::string> scan_placeholders(std::string_view body);

// Byte-exact substitution at every occurrence; pure. The binding must cover
// the template's placeholders exactly: a missing name or an extra key is a
// ConfigError naming the offender.
RenderedPrompt render(const PromptTemplate& tmpl, const PlaceholderBinding& binding);

// One line per sense: "sense_id: gloss" plus " (synonyms: a, b)" when the
// flag is set and the sense has synonyms.
std::string format_definitions(const FilteredDefinitions& defs, bool include_synonyms);

// One line per example: "sentence -> sense_id". Empty input renders the
// literal line "No examples available."
std::string format_examples(std::span<const ExampleRef> examples);

}  // namespace wsd
