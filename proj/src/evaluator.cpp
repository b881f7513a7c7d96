#include "wsd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

namespace wsd {

std::string to_string(Level level) {
    return level == Level::prediction ? "prediction" : "suggestion";
}

std::pair<bool, bool> score_instance(const std::vector<std::string>& predicted,
                                     const std::string& gold) {
    std::string target = trim(gold);
    bool prediction_correct = false;
    bool suggestion_correct = false;
    if (!predicted.empty()) {
        prediction_correct = trim(predicted[0]) == target;
        suggestion_correct = prediction_correct;
        if (!suggestion_correct && predicted.size() >= 2)
            suggestion_correct = trim(predicted[1]) == target;
    }
    return {prediction_correct, suggestion_correct};
}

Outcome make_outcome(std::string instance_id, PosTag pos, std::string gold,
                     std::vector<std::string> predicted, bool parse_failure) {
    Outcome o;
    o.instance_id = std::move(instance_id);
    o.pos = pos;
    o.gold = std::move(gold);
    o.predicted = std::move(predicted);
    o.parse_failure = parse_failure;
    auto [pred, sugg] = score_instance(o.predicted, o.gold);
    o.prediction_correct = pred;
    o.suggestion_correct = sugg;
    return o;
}

std::string AccuracyCell::display() const {
    if (denominator <= 0) return "-";
    return format_ratio_2dp(numerator, denominator);
}

const AccuracyCell& AccuracyTable::cell(std::optional<PosTag> pos, Level level) const {
    if (!pos) return level == Level::prediction ? all_prediction : all_suggestion;
    const auto& map = level == Level::prediction ? prediction : suggestion;
    return map.at(*pos);
}

AccuracyTable score_run(std::span<const Outcome> outcomes) {
    if (outcomes.empty()) throw DataError("cannot score an empty outcome list");
    AccuracyTable table;
    for (PosTag pos : kAllPos) {
        table.prediction[pos] = {};
        table.suggestion[pos] = {};
    }
    for (const auto& o : outcomes) {
        auto& p = table.prediction[o.pos];
        auto& s = table.suggestion[o.pos];
        ++p.denominator;
        ++s.denominator;
        if (o.prediction_correct) ++p.numerator;
        if (o.suggestion_correct) ++s.numerator;
        ++table.all_prediction.denominator;
        ++table.all_suggestion.denominator;
        if (o.prediction_correct) ++table.all_prediction.numerator;
        if (o.suggestion_correct) ++table.all_suggestion.numerator;
    }
    return table;
}

namespace {

bool level_flag(const Outcome& o, Level level) {
    return level == Level::prediction ? o.prediction_correct : o.suggestion_correct;
}

// Two-sided exact binomial: p = min(1, 2 * sum_{k<=min(b,c)} C(n,k) / 2^n).
double exact_binomial_p(long long b, long long c) {
    long long n = b + c;
    if (n == 0) return 1.0;
    long long m = std::min(b, c);
    // C(n,k)/2^n accumulated in floating point; n < 25 keeps this exact
    // enough (integers below 2^53).
    double coeff = 1.0;  // C(n,0)
    double tail = 0.0;
    for (long long k = 0; k <= m; ++k) {
        if (k > 0) coeff = coeff * double(n - k + 1) / double(k);
        tail += coeff;
    }
    double p = 2.0 * tail * std::pow(0.5, double(n));
    return std::min(1.0, p);
}

// chi-square(1) upper tail: P(X > x) = erfc(sqrt(x/2)).
double chi_square1_upper_tail(double x) { return std::erfc(std::sqrt(x / 2.0)); }

}  // namespace

McNemarResult mcnemar(std::span<const Outcome> run_a, std::span<const Outcome> run_b,
                      Level level) {
    std::unordered_map<std::string, const Outcome*> by_id;
    by_id.reserve(run_b.size());
    for (const auto& o : run_b) {
        if (!by_id.emplace(o.instance_id, &o).second)
            throw DataError("duplicate instance_id in run B: " + o.instance_id);
    }
    std::set<std::string> a_ids;
    for (const auto& o : run_a)
        if (!a_ids.insert(o.instance_id).second)
            throw DataError("duplicate instance_id in run A: " + o.instance_id);

    std::vector<std::string> only_a, only_b;
    for (const auto& id : a_ids)
        if (!by_id.count(id)) only_a.push_back(id);
    for (const auto& o : run_b)
        if (!a_ids.count(o.instance_id)) only_b.push_back(o.instance_id);
    if (!only_a.empty() || !only_b.empty()) {
        std::ostringstream os;
        os << "runs cover different instance sets (" << only_a.size() << " only in A, "
           << only_b.size() << " only in B):";
        int shown = 0;
        for (const auto& id : only_a) {
            if (shown++ >= 10) break;
            os << " A:" << id;
        }
        for (const auto& id : only_b) {
            if (shown++ >= 10) break;
            os << " B:" << id;
        }
        throw DataError(os.str());
    }

    McNemarResult result;
    for (const auto& a : run_a) {
        const Outcome& b = *by_id.at(a.instance_id);
        bool a_ok = level_flag(a, level);
        bool b_ok = level_flag(b, level);
        if (a_ok && !b_ok) ++result.b;
        if (!a_ok && b_ok) ++result.c;
    }

    long long n = result.b + result.c;
    if (n < kMcNemarExactThreshold) {
        result.method = McNemarResult::Method::exact_binomial;
        result.p_value = exact_binomial_p(result.b, result.c);
    } else {
        result.method = McNemarResult::Method::chi_square_cc;
        double diff = double(std::llabs(result.b - result.c)) - 1.0;
        double stat = diff * diff / double(n);
        result.statistic = stat;
        result.p_value = chi_square1_upper_tail(stat);
    }
    result.significant_at_05 = result.p_value < 0.05;
    return result;
}

std::vector<std::string> extract_failures(std::span<const Outcome> run, Level level) {
    std::vector<std::string> ids;
    for (const auto& o : run)
        if (!level_flag(o, level)) ids.push_back(o.instance_id);
    return ids;
}

namespace {

std::string pos_header(PosTag pos) {
    switch (pos) {
        case PosTag::noun: return "Noun";
        case PosTag::verb: return "Verb";
        case PosTag::adjective: return "Adj";
        case PosTag::adverb: return "Adv";
    }
    return "?";
}

std::string pad(std::string text, size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
}

// The asterisk marks the best-performing row at a level when its pairwise
// comparisons are all significant.
bool row_starred(const std::string& label, Level level,
                 const std::vector<LabeledTable>& tables,
                 const std::vector<LabeledComparison>& comparisons) {
    bool any = false;
    for (const auto& cmp : comparisons) {
        if (cmp.level != level) continue;
        if (cmp.label_a != label && cmp.label_b != label) continue;
        any = true;
        if (!cmp.result.significant_at_05) return false;
    }
    if (!any) return false;
    double own = 0.0;
    for (const auto& lt : tables)
        if (lt.label == label) own = lt.table.cell(std::nullopt, level).ratio();
    for (const auto& lt : tables)
        if (lt.table.cell(std::nullopt, level).ratio() > own) return false;
    return true;
}

std::string format_full(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

}  // namespace

Report render_report(const std::vector<LabeledTable>& tables,
                     const std::vector<LabeledComparison>& comparisons) {
    std::ostringstream text;
    std::ostringstream csv;

    // Header denominators come from the first table when all tables agree;
    // otherwise plain POS names.
    bool uniform = !tables.empty();
    for (const auto& lt : tables)
        for (PosTag pos : kAllPos)
            if (lt.table.cell(pos, Level::prediction).denominator !=
                tables.front().table.cell(pos, Level::prediction).denominator)
                uniform = false;

    const size_t label_w = 34, level_w = 7, cell_w = 11;
    text << pad("Model", label_w) << pad("", level_w);
    for (PosTag pos : kAllPos) {
        std::string header = pos_header(pos);
        if (uniform) {
            long long den = tables.front().table.cell(pos, Level::prediction).denominator;
            if (den > 0) header += " " + std::to_string(den);
        }
        text << pad(header, cell_w);
    }
    {
        std::string header = "All word";
        if (uniform) {
            long long den =
                tables.front().table.cell(std::nullopt, Level::prediction).denominator;
            if (den > 0) header += " " + std::to_string(den);
        }
        text << header << '\n';
    }
    text << std::string(label_w + level_w + 4 * cell_w + 14, '-') << '\n';

    csv << "label,level,pos,numerator,denominator,ratio\n";

    for (const auto& lt : tables) {
        bool first_row = true;
        for (Level level : {Level::suggestion, Level::prediction}) {
            bool star = row_starred(lt.label, level, tables, comparisons);
            text << pad(first_row ? lt.label : "", label_w)
                 << pad(level == Level::suggestion ? "S" : "P", level_w);
            for (PosTag pos : kAllPos) {
                const auto& cell = lt.table.cell(pos, level);
                text << pad(cell.display() + (star && cell.denominator > 0 ? "*" : ""), cell_w);
            }
            const auto& all = lt.table.cell(std::nullopt, level);
            text << all.display() + (star && all.denominator > 0 ? "*" : "") << '\n';
            first_row = false;

            for (PosTag pos : kAllPos) {
                const auto& cell = lt.table.cell(pos, level);
                csv << lt.label << ',' << to_string(level) << ',' << to_string(pos) << ','
                    << cell.numerator << ',' << cell.denominator << ','
                    << format_full(cell.ratio()) << '\n';
            }
            csv << lt.label << ',' << to_string(level) << ",all," << all.numerator << ','
                << all.denominator << ',' << format_full(all.ratio()) << '\n';
        }
    }

    if (!comparisons.empty()) {
        text << "\nPairwise McNemar comparisons\n";
        for (const auto& cmp : comparisons) {
            text << "  [" << to_string(cmp.level) << "] " << cmp.label_a << " vs " << cmp.label_b
                 << ": b=" << cmp.result.b << " c=" << cmp.result.c << " method="
                 << (cmp.result.method == McNemarResult::Method::exact_binomial
                         ? "exact_binomial"
                         : "chi_square_cc");
            if (cmp.result.statistic) text << " statistic=" << format_full(*cmp.result.statistic);
            text << " p=" << format_full(cmp.result.p_value)
                 << (cmp.result.significant_at_05 ? " (significant at 0.05)" : "") << '\n';
        }
        text << "\n* marks the best row whose pairwise McNemar comparisons are all significant "
                "at p < 0.05.\n";
    }
    text << "S: suggestion level (most 2 confident answers), P: prediction level (best "
            "answer).\n";
    text << "No correction for multiple comparisons is applied.\n";

    return Report{text.str(), csv.str()};
}

}  // namespace wsd
