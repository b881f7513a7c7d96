#include "wsd/run_record.hpp"

#include <filesystem>
#include <fstream>

namespace wsd {

namespace {

nlohmann::ordered_json record_to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["instance_id"] = r.instance_id;
    j["pos"] = to_string(r.pos);
    j["gold"] = r.gold;
    j["predicted"] = r.predicted;
    j["parse_failure"] = r.parse_failure;
    j["strategy"] = r.strategy;
    j["model_key"] = r.model_key;
    j["latency_ms"] = r.latency_ms;
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
    return j;
}

[[noreturn]] void record_error(const std::string& path, size_t index, const std::string& what) {
    throw DataError(path + ": record " + std::to_string(index) + ": " + what);
}

RunRecord record_from_json(const nlohmann::ordered_json& j, const std::string& path,
                           size_t index) {
    if (!j.is_object()) record_error(path, index, "not a JSON object");
    for (const char* field : {"instance_id", "pos", "gold", "predicted", "parse_failure",
                              "strategy", "model_key"})
        if (!j.contains(field))
            record_error(path, index, std::string("missing field '") + field + "'");

    RunRecord r;
    if (!j["instance_id"].is_string()) record_error(path, index, "instance_id must be a string");
    r.instance_id = j["instance_id"].get<std::string>();
    auto pos = j["pos"].is_string() ? pos_from_string(j["pos"].get<std::string>()) : std::nullopt;
    if (!pos) record_error(path, index, "invalid pos");
    r.pos = *pos;
    if (!j["gold"].is_string()) record_error(path, index, "gold must be a string");
    r.gold = j["gold"].get<std::string>();
    if (!j["predicted"].is_array()) record_error(path, index, "predicted must be an array");
    for (const auto& item : j["predicted"]) {
        if (!item.is_string()) record_error(path, index, "predicted entries must be strings");
        r.predicted.push_back(item.get<std::string>());
    }
    if (!j["parse_failure"].is_boolean())
        record_error(path, index, "parse_failure must be a boolean");
    r.parse_failure = j["parse_failure"].get<bool>();
    r.strategy = j["strategy"].get<std::string>();
    r.model_key = j["model_key"].get<std::string>();
    r.latency_ms = j.value("latency_ms", 0L);
    r.prompt_tokens = j.value("prompt_tokens", 0L);
    r.completion_tokens = j.value("completion_tokens", 0L);
    if (j.contains("diagnostics")) r.diagnostics = j["diagnostics"];
    return r;
}

nlohmann::ordered_json meta_to_json(const RunMeta& m) {
    nlohmann::ordered_json j;
    j["created_at"] = m.created_at;
    j["seed"] = m.seed;
    j["config"] = m.config;
    j["template_digests"] = m.template_digests;
    j["partial"] = m.partial;
    j["live_calls"] = m.live_calls;
    j["cache_hits"] = m.cache_hits;
    j["parse_failures"] = m.parse_failures;
    return j;
}

RunMeta meta_from_json(const nlohmann::ordered_json& j) {
    RunMeta m;
    m.created_at = j.value("created_at", std::string());
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("config")) m.config = j["config"];
    if (j.contains("template_digests"))
        for (const auto& [key, value] : j["template_digests"].items())
            m.template_digests[key] = value.get<std::string>();
    m.partial = j.value("partial", false);
    m.live_calls = j.value("live_calls", 0L);
    m.cache_hits = j.value("cache_hits", 0L);
    m.parse_failures = j.value("parse_failures", 0L);
    return m;
}

}  // namespace

void write_run_file(const std::string& path, const RunMeta& meta,
                    const std::vector<RunRecord>& records) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open run file for writing: " + path);
    nlohmann::ordered_json header;
    header["meta"] = meta_to_json(meta);
    out << header.dump() << '\n';
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
    if (!out) throw DataError("failed writing run file: " + path);
}

RunFile load_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open run file: " + path);
    RunFile run;
    std::string line;
    size_t line_no = 0, record_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto j = nlohmann::ordered_json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(path + ": line " + std::to_string(line_no) + " is not valid JSON");
        if (line_no == 1 && j.is_object() && j.contains("meta")) {
            run.meta = meta_from_json(j["meta"]);
            continue;
        }
        run.records.push_back(record_from_json(j, path, record_index));
        ++record_index;
    }
    if (run.records.empty()) throw DataError(path + ": run file contains no records");
    return run;
}

std::vector<Outcome> outcomes_of(const std::vector<RunRecord>& records) {
    std::vector<Outcome> outcomes;
    outcomes.reserve(records.size());
    for (const auto& r : records)
        outcomes.push_back(make_outcome(r.instance_id, r.pos, r.gold, r.predicted,
                                        r.parse_failure));
    return outcomes;
}

}  // namespace wsd
