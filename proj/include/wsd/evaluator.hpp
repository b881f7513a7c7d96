#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsd/corpus.hpp"

namespace wsd {

enum class Level { prediction, suggestion };

std::string to_string(Level level);

struct Outcome {
    std::string instance_id;
    PosTag pos = PosTag::noun;
    std::string gold;
    std::vector<std::string> predicted;  // empty on parse failure
    bool prediction_correct = false;
    bool suggestion_correct = false;
    bool parse_failure = false;
};

// prediction_correct <=> the first id equals gold; suggestion_correct <=>
// gold is among the first two. Ids compare exactly after whitespace trimming,
// case-sensitive.
std::pair<bool, bool> score_instance(const std::vector<std::string>& predicted,
                                     const std::string& gold);

Outcome make_outcome(std::string instance_id, PosTag pos, std::string gold,
                     std::vector<std::string> predicted, bool parse_failure);

struct AccuracyCell {
    long long numerator = 0;
    long long denominator = 0;

    double ratio() const { return denominator ? double(numerator) / double(denominator) : 0.0; }
    std::string display() const;  // 2 decimals, half-up
};

// Per-POS and all-word accuracy at both levels; exact rational counts.
struct AccuracyTable {
    std::map<PosTag, AccuracyCell> prediction;
    std::map<PosTag, AccuracyCell> suggestion;
    AccuracyCell all_prediction;
    AccuracyCell all_suggestion;

    const AccuracyCell& cell(std::optional<PosTag> pos, Level level) const;
};

AccuracyTable score_run(std::span<const Outcome> outcomes);  // DataError when empty

struct McNemarResult {
    long long b = 0;  // A correct, B incorrect
    long long c = 0;  // A incorrect, B correct
    enum class Method { exact_binomial, chi_square_cc } method = Method::exact_binomial;
    std::optional<double> statistic;  // absent for the exact branch
    double p_value = 1.0;
    bool significant_at_05 = false;
};

inline constexpr long long kMcNemarExactThreshold = 25;  // exact when b + c < 25

// Paired discordant counts at the chosen level. Exact two-sided binomial for
// small b+c; continuity-corrected chi-square(1) otherwise. Both runs must
// cover the identical instance_id set (DataError listing up to 10 of the
// symmetric difference otherwise).
McNemarResult mcnemar(std::span<const Outcome> run_a, std::span<const Outcome> run_b,
                      Level level);

// Instance ids whose flag at the level is false, input order.
std::vector<std::string> extract_failures(std::span<const Outcome> run, Level level);

struct LabeledTable {
    std::string label;
    AccuracyTable table;
};

struct LabeledComparison {
    std::string label_a;
    std::string label_b;
    Level level = Level::prediction;
    McNemarResult result;
};

struct Report {
    std::string text;
    std::string csv;  // full precision
};

// Table-style report: POS columns with denominators in the header, one S and
// one P row per label, asterisks on rows whose pairwise comparisons are all
// significant at p < 0.05.
Report render_report(const std::vector<LabeledTable>& tables,
                     const std::vector<LabeledComparison>& comparisons);

}  // namespace wsd
