#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsd/gateway.hpp"
#include "wsd/run_record.hpp"
#include "wsd/strategies.hpp"

namespace wsd {

// Everything a run needs; serialized into run metadata so a run can be
// re-executed from its own header.
struct RunConfig {
    std::string inventory;
    std::string train;
    std::string test;
    std::string kb_path = "kb.json";
    StrategyId strategy = StrategyId::few_shot_kb;
    ModelSpec model;
    std::map<PosTag, std::size_t> quotas = {{PosTag::noun, 400},
                                            {PosTag::verb, 300},
                                            {PosTag::adjective, 300},
                                            {PosTag::adverb, 50}};
    std::uint64_t seed = 1;
    int per_sense_cap = 3;
    std::optional<std::string> cache_path;
    std::optional<std::string> replay_path;
    std::optional<std::string> template_dir;
    std::string output_dir = "out";
    std::string run_name;  // default run_<strategy>.jsonl
    int max_in_flight = 4;
};

nlohmann::ordered_json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::ordered_json& j);  // rejects unknown keys
RunConfig load_config(const std::string& path);

// "noun=400,verb=300,adjective=300,adverb=50"
std::map<PosTag, std::size_t> parse_quotas(const std::string& text);

struct RunSummary {
    std::string run_path;
    std::size_t instances = 0;
    std::size_t parse_failures = 0;
    Gateway::Stats gateway;
    bool partial = false;
};

// build-kb: parse the training data, build the trie, write the JSON KB, and
// print per-POS counts.
void cmd_build_kb(const RunConfig& cfg, std::ostream& out);

// sample: write the seeded evaluation sample as a labeled instance file.
void cmd_sample(const RunConfig& cfg, const std::string& out_path, std::ostream& out);

// run: disambiguate every sampled instance and write the run file.
RunSummary cmd_run(const RunConfig& cfg, std::ostream& out);

// score: accuracy tables for each run file plus pairwise McNemar blocks when
// two or more runs share an instance set. Writes report.txt/report.csv under
// out_dir when given.
Report cmd_score(const std::vector<std::string>& run_paths,
                 const std::optional<std::string>& out_dir, std::ostream& out);

// compare: McNemar detail for exactly two runs at both levels.
void cmd_compare(const std::string& run_a, const std::string& run_b, std::ostream& out);

struct CornerSummary {
    std::size_t prior_failures = 0;
    std::size_t corrected = 0;
    std::size_t still_failing = 0;
    std::string cell;  // Table-7 shaped "57 (0.24)"
    std::string run_path;
};

// corner: rerun a base run's prediction-level failures with the configured
// strategy and report the corrected count and ratio.
CornerSummary cmd_corner(const RunConfig& cfg, const std::string& base_run_path,
                         std::ostream& out);

void cmd_cache_inspect(const std::string& cache_path, std::ostream& out);
void cmd_cache_prune(const std::string& cache_path, std::optional<std::string> keep_model,
                     std::optional<int> max_age_days, std::ostream& out);

// Full argv-level entry point: parses flags, maps exceptions to exit codes
// (0 ok, 1 usage/config, 2 data, 3 provider terminal).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wsd
