#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsd/evaluator.hpp"

namespace wsd {

// One line of a run file.
struct RunRecord {
    std::string instance_id;
    PosTag pos = PosTag::noun;
    std::string gold;
    std::vector<std::string> predicted;
    bool parse_failure = false;
    std::string strategy;
    std::string model_key;
    long latency_ms = 0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();
};

// Optional first line `{"meta": {...}}`; everything needed to re-execute the
// run lives here.
struct RunMeta {
    std::string created_at;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::map<std::string, std::string> template_digests;
    std::uint64_t seed = 0;
    bool partial = false;
    long live_calls = 0;
    long cache_hits = 0;
    long parse_failures = 0;
};

struct RunFile {
    std::optional<RunMeta> meta;
    std::vector<RunRecord> records;
};

void write_run_file(const std::string& path, const RunMeta& meta,
                    const std::vector<RunRecord>& records);

// DataError names the record index on schema violations; unknown extra
// fields are tolerated.
RunFile load_run_file(const std::string& path);

std::vector<Outcome> outcomes_of(const std::vector<RunRecord>& records);

}  // namespace wsd
