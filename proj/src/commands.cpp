#include "wsd/commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace wsd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["inventory"] = cfg.inventory;
    j["train"] = cfg.train;
    j["test"] = cfg.test;
    j["kb_path"] = cfg.kb_path;
    j["strategy"] = to_string(cfg.strategy);
    j["model"] = {{"model_key", cfg.model.model_key},
                  {"endpoint_url", cfg.model.endpoint_url},
                  {"auth_env_var", cfg.model.auth_env_var},
                  {"auth_header", cfg.model.auth_header},
                  {"temperature", cfg.model.temperature},
                  {"max_tokens", cfg.model.max_tokens}};
    nlohmann::ordered_json quotas;
    for (PosTag pos : kAllPos) {
        auto it = cfg.quotas.find(pos);
        quotas[to_string(pos)] = it == cfg.quotas.end() ? 0 : it->second;
    }
    j["quotas"] = quotas;
    j["seed"] = cfg.seed;
    j["per_sense_cap"] = cfg.per_sense_cap;
    j["cache_path"] = cfg.cache_path ? *cfg.cache_path : "";
    j["replay_path"] = cfg.replay_path ? *cfg.replay_path : "";
    j["template_dir"] = cfg.template_dir ? *cfg.template_dir : "";
    j["output_dir"] = cfg.output_dir;
    j["run_name"] = cfg.run_name;
    j["max_in_flight"] = cfg.max_in_flight;
    return j;
}

RunConfig config_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {
        "inventory", "train",         "test",       "kb_path",     "strategy",
        "model",     "quotas",        "seed",       "per_sense_cap", "cache_path",
        "replay_path", "template_dir", "output_dir", "run_name",    "max_in_flight"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key: " + key);

    RunConfig cfg;
    cfg.inventory = j.value("inventory", std::string());
    cfg.train = j.value("train", std::string());
    cfg.test = j.value("test", std::string());
    cfg.kb_path = j.value("kb_path", cfg.kb_path);
    if (j.contains("strategy")) {
        auto s = strategy_from_string(j["strategy"].get<std::string>());
        if (!s) throw ConfigError("unknown strategy: " + j["strategy"].get<std::string>());
        cfg.strategy = *s;
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        cfg.model.model_key = m.value("model_key", std::string());
        cfg.model.endpoint_url = m.value("endpoint_url", std::string());
        cfg.model.auth_env_var = m.value("auth_env_var", std::string());
        cfg.model.auth_header = m.value("auth_header", cfg.model.auth_header);
        cfg.model.temperature = m.value("temperature", 0.0);
        cfg.model.max_tokens = m.value("max_tokens", 500);
        if (cfg.model.temperature < 0) throw ConfigError("temperature must be >= 0");
        if (cfg.model.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
    }
    if (j.contains("quotas")) {
        cfg.quotas.clear();
        for (const auto& [key, value] : j["quotas"].items()) {
            auto pos = pos_from_string(key);
            if (!pos) throw ConfigError("unknown POS in quotas: " + key);
            if (!value.is_number_unsigned())
                throw ConfigError("quota for " + key + " must be a non-negative integer");
            cfg.quotas[*pos] = value.get<std::size_t>();
        }
        for (PosTag pos : kAllPos) cfg.quotas.emplace(pos, 0);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.per_sense_cap = j.value("per_sense_cap", cfg.per_sense_cap);
    if (cfg.per_sense_cap < 1) throw ConfigError("per_sense_cap must be >= 1");
    auto opt_path = [&](const char* key) -> std::optional<std::string> {
        std::string v = j.value(key, std::string());
        if (v.empty()) return std::nullopt;
        return v;
    };
    cfg.cache_path = opt_path("cache_path");
    cfg.replay_path = opt_path("replay_path");
    cfg.template_dir = opt_path("template_dir");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.run_name = j.value("run_name", std::string());
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
    if (cfg.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    auto j = nlohmann::ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return config_from_json(j);
}

std::map<PosTag, std::size_t> parse_quotas(const std::string& text) {
    std::map<PosTag, std::size_t> quotas;
    for (PosTag pos : kAllPos) quotas[pos] = 0;
    for (const auto& item : split_list(text)) {
        auto kv = split(item, '=');
        if (kv.size() != 2) throw ConfigError("quota item must be pos=count: " + item);
        auto pos = pos_from_string(kv[0]);
        if (!pos) throw ConfigError("unknown POS in quotas: " + kv[0]);
        std::string count = trim(kv[1]);
        if (count.empty() || count.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("invalid quota count: " + item);
        quotas[*pos] = std::stoull(count);
    }
    return quotas;
}

// ---------------------------------------------------------------------------
// Shared run machinery

namespace {

void print_stats(const CorpusStats& stats, std::ostream& out) {
    for (PosTag pos : kAllPos)
        out << "  " << to_string(pos) << ": " << stats.per_pos.at(pos) << '\n';
    out << "  total: " << stats.total << '\n';
}

std::map<std::string, std::string> digest_templates(const TemplateSet& templates) {
    std::map<std::string, std::string> digests;
    for (const auto& [id, tmpl] : templates) digests[to_string(id)] = sha256_hex(tmpl.body);
    return digests;
}

RunRecord record_of(const DisambiguationResult& result, const WsdInstance& instance,
                    const RunConfig& cfg) {
    RunRecord r;
    r.instance_id = instance.instance_id;
    r.pos = instance.pos;
    r.gold = instance.gold_sense_id.value_or("");
    if (result.prediction) r.predicted = result.prediction->sense_ids;
    r.parse_failure = result.parse_failure();
    r.strategy = to_string(result.strategy);
    r.model_key = cfg.model.model_key;
    for (const auto& resp : result.raw_responses) {
        r.latency_ms += resp.latency_ms;
        r.prompt_tokens += resp.prompt_tokens;
        r.completion_tokens += resp.completion_tokens;
    }
    r.diagnostics = result.diagnostics;
    if (!result.parse_error.empty()) r.diagnostics["parse_error"] = result.parse_error;
    return r;
}

struct PipelineResult {
    enum class ErrorKind { provider, data, config };

    std::vector<RunRecord> records;
    std::optional<std::string> terminal_error;
    ErrorKind error_kind = ErrorKind::provider;

    // Preserves the failure's category across the worker-thread boundary.
    [[noreturn]] void rethrow() const {
        switch (error_kind) {
            case ErrorKind::data: throw DataError(*terminal_error);
            case ErrorKind::config: throw ConfigError(*terminal_error);
            case ErrorKind::provider: break;
        }
        throw ProviderTerminalError(*terminal_error);
    }
};

// Runs instances through the strategy pipeline with up to max_in_flight
// workers. Results keep instance order; the first terminal error stops new
// work and is reported, with completed records retained.
PipelineResult run_instances(const RunConfig& cfg, const std::vector<WsdInstance>& instances,
                             const KnowledgeBase& kb, const SenseInventory& inventory,
                             const TemplateSet& templates, Gateway& gateway) {
    StrategyContext ctx{kb,      inventory,        templates, cfg.model,
                        gateway, cfg.per_sense_cap, cfg.seed};

    std::vector<std::optional<DisambiguationResult>> results(instances.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::optional<std::string> terminal_error;
    PipelineResult::ErrorKind error_kind = PipelineResult::ErrorKind::provider;

    auto record_failure = [&](PipelineResult::ErrorKind kind, const std::string& what) {
        std::lock_guard lock(error_mutex);
        if (!terminal_error) {
            terminal_error = what;
            error_kind = kind;
        }
        stop.store(true);
    };

    auto worker = [&] {
        while (!stop.load()) {
            std::size_t i = next.fetch_add(1);
            if (i >= instances.size()) return;
            try {
                results[i] = disambiguate(cfg.strategy, instances[i], ctx);
            } catch (const ProviderTerminalError& err) {
                record_failure(PipelineResult::ErrorKind::provider, err.what());
                return;
            } catch (const ConfigError& err) {
                record_failure(PipelineResult::ErrorKind::config, err.what());
                return;
            } catch (const std::exception& err) {
                // Unknown lemma and friends are data defects of the corpus;
                // stop the run rather than silently skipping instances.
                record_failure(PipelineResult::ErrorKind::data,
                               std::string("instance '") + instances[i].instance_id + "': " +
                                   err.what());
                return;
            }
        }
    };

    std::size_t n_workers =
        std::min<std::size_t>(std::max(1, cfg.max_in_flight), instances.size());
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
    for (auto& t : workers) t.join();

    PipelineResult out;
    out.terminal_error = terminal_error;
    out.error_kind = error_kind;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!results[i]) break;  // stopped here
        out.records.push_back(record_of(*results[i], instances[i], cfg));
    }
    return out;
}

Gateway make_gateway(const RunConfig& cfg, std::shared_ptr<ResponseCache>& cache_out) {
    std::shared_ptr<ChatProvider> provider;
    if (cfg.replay_path)
        provider = make_replay_provider(*cfg.replay_path);
    else
        provider = make_http_provider();
    std::shared_ptr<ResponseCache> cache;
    if (cfg.cache_path) cache = std::make_shared<ResponseCache>(*cfg.cache_path);
    cache_out = cache;
    Gateway::Options options;
    options.max_in_flight = cfg.max_in_flight;
    return Gateway(provider, cache, options);
}

std::string run_file_path(const RunConfig& cfg, const std::string& fallback_name) {
    fs::create_directories(cfg.output_dir);
    std::string name = cfg.run_name.empty() ? fallback_name : cfg.run_name;
    return (fs::path(cfg.output_dir) / name).string();
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("config is missing the ") + what + " path");
    if (!fs::exists(path))
        throw DataError(std::string(what) + " file does not exist: " + path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

void cmd_build_kb(const RunConfig& cfg, std::ostream& out) {
    require_file(cfg.inventory, "inventory");
    require_file(cfg.train, "train");

    std::ifstream inv_in(cfg.inventory);
    std::vector<SenseEntry> entries;
    try {
        entries = parse_sense_inventory(inv_in);
    } catch (const DataError& err) {
        throw DataError(cfg.inventory + ": " + err.what());
    }
    SenseInventory inventory;
    for (auto& e : entries) inventory.emplace(e.sense_id, std::move(e));

    std::ifstream train_in(cfg.train);
    std::vector<WsdInstance> train;
    try {
        train = parse_instances(train_in, /*labeled=*/true);
    } catch (const DataError& err) {
        throw DataError(cfg.train + ": " + err.what());
    }
    for (const auto& inst : train)
        if (!inventory.count(*inst.gold_sense_id))
            throw DataError(cfg.train + ": instance '" + inst.instance_id +
                            "' has gold sense id '" + *inst.gold_sense_id +
                            "' not present in the inventory");

    KnowledgeBase kb = build_kb(train);
    save_kb(kb, cfg.kb_path);

    out << "built knowledge base: " << cfg.kb_path << '\n';
    out << "training distribution:\n";
    print_stats(corpus_stats(train), out);
}

void cmd_sample(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
    Corpus corpus = load_corpus(cfg.inventory, cfg.train, cfg.test);
    auto sampled = sample_eval_set(corpus.test, cfg.quotas, cfg.seed);
    auto parent = fs::path(out_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream file(out_path);
    if (!file) throw DataError("cannot open sample output file: " + out_path);
    write_instances(sampled, /*labeled=*/true, file);
    out << "sampled " << sampled.size() << " instances (seed " << cfg.seed << ") -> " << out_path
        << '\n';
    print_stats(corpus_stats(sampled), out);
}

RunSummary cmd_run(const RunConfig& cfg, std::ostream& out) {
    Corpus corpus = load_corpus(cfg.inventory, cfg.train, cfg.test);
    require_file(cfg.kb_path, "knowledge base (run build-kb first)");
    KnowledgeBase kb = load_kb(cfg.kb_path);
    std::set<TemplateId> overridden;
    TemplateSet templates = load_templates(cfg.template_dir, &overridden);

    auto sampled = sample_eval_set(corpus.test, cfg.quotas, cfg.seed);

    std::shared_ptr<ResponseCache> cache;
    Gateway gateway = make_gateway(cfg, cache);

    PipelineResult pipeline =
        run_instances(cfg, sampled, kb, corpus.inventory, templates, gateway);

    RunMeta meta;
    meta.created_at = utc_timestamp();
    meta.seed = cfg.seed;
    meta.config = config_to_json(cfg);
    meta.template_digests = digest_templates(templates);
    if (!overridden.empty()) {
        std::vector<std::string> names;
        for (TemplateId id : overridden) names.push_back(to_string(id));
        meta.config["overridden_templates"] = names;
    }
    meta.partial = pipeline.terminal_error.has_value();
    auto stats = gateway.stats();
    meta.live_calls = stats.live_calls;
    meta.cache_hits = stats.cache_hits;
    meta.parse_failures = static_cast<long>(
        std::count_if(pipeline.records.begin(), pipeline.records.end(),
                      [](const RunRecord& r) { return r.parse_failure; }));

    std::string path = run_file_path(cfg, "run_" + to_string(cfg.strategy) + ".jsonl");
    write_run_file(path, meta, pipeline.records);

    RunSummary summary;
    summary.run_path = path;
    summary.instances = pipeline.records.size();
    summary.parse_failures = static_cast<std::size_t>(meta.parse_failures);
    summary.gateway = stats;
    summary.partial = meta.partial;

    out << "run file: " << path << '\n';
    out << "instances: " << summary.instances << " of " << sampled.size() << '\n';
    out << "parse failures (scored incorrect): " << summary.parse_failures << '\n';
    out << "live calls: " << stats.live_calls << ", cache hits: " << stats.cache_hits
        << ", retries: " << stats.retries << '\n';
    if (pipeline.terminal_error) {
        out << "ABORTED (partial output): " << *pipeline.terminal_error << '\n';
        pipeline.rethrow();
    }
    return summary;
}

namespace {

std::string label_of(const RunFile& run, const std::string& path) {
    if (run.meta && run.meta->config.contains("strategy") &&
        run.meta->config.contains("model")) {
        return run.meta->config["strategy"].get<std::string>() + "/" +
               run.meta->config["model"].value("model_key", std::string("model"));
    }
    if (!run.records.empty())
        return run.records.front().strategy + "/" + run.records.front().model_key;
    return fs::path(path).stem().string();
}

}  // namespace

Report cmd_score(const std::vector<std::string>& run_paths,
                 const std::optional<std::string>& out_dir, std::ostream& out) {
    if (run_paths.empty()) throw ConfigError("score needs at least one run file");

    std::vector<LabeledTable> tables;
    std::vector<std::vector<Outcome>> outcome_sets;
    std::vector<std::string> labels;
    for (const auto& path : run_paths) {
        RunFile run = load_run_file(path);
        auto outcomes = outcomes_of(run.records);
        std::string label = label_of(run, path);
        while (std::find(labels.begin(), labels.end(), label) != labels.end())
            label += "'";
        labels.push_back(label);
        tables.push_back(LabeledTable{label, score_run(outcomes)});
        outcome_sets.push_back(std::move(outcomes));
    }

    std::vector<LabeledComparison> comparisons;
    std::vector<std::string> skipped;
    for (std::size_t i = 0; i < outcome_sets.size(); ++i) {
        for (std::size_t k = i + 1; k < outcome_sets.size(); ++k) {
            for (Level level : {Level::suggestion, Level::prediction}) {
                try {
                    comparisons.push_back(LabeledComparison{
                        labels[i], labels[k], level,
                        mcnemar(outcome_sets[i], outcome_sets[k], level)});
                } catch (const DataError& err) {
                    skipped.push_back(labels[i] + " vs " + labels[k] + ": " + err.what());
                }
            }
        }
    }

    Report report = render_report(tables, comparisons);
    out << report.text;
    for (const auto& note : skipped) out << "comparison skipped: " << note << '\n';

    if (out_dir) {
        fs::create_directories(*out_dir);
        std::ofstream txt(fs::path(*out_dir) / "report.txt");
        txt << report.text;
        std::ofstream csv(fs::path(*out_dir) / "report.csv");
        csv << report.csv;
        out << "report written to " << *out_dir << "/report.{txt,csv}\n";
    }
    return report;
}

void cmd_compare(const std::string& run_a, const std::string& run_b, std::ostream& out) {
    RunFile a = load_run_file(run_a);
    RunFile b = load_run_file(run_b);
    auto outcomes_a = outcomes_of(a.records);
    auto outcomes_b = outcomes_of(b.records);
    out << "A: " << label_of(a, run_a) << " (" << outcomes_a.size() << " instances)\n";
    out << "B: " << label_of(b, run_b) << " (" << outcomes_b.size() << " instances)\n";
    for (Level level : {Level::prediction, Level::suggestion}) {
        McNemarResult r = mcnemar(outcomes_a, outcomes_b, level);
        out << to_string(level) << " level: b=" << r.b << " c=" << r.c << " method="
            << (r.method == McNemarResult::Method::exact_binomial ? "exact_binomial"
                                                                  : "chi_square_cc");
        if (r.statistic) out << " statistic=" << *r.statistic;
        out << " p=" << r.p_value << (r.significant_at_05 ? " significant" : " not significant")
            << " at p<0.05\n";
    }
}

CornerSummary cmd_corner(const RunConfig& cfg, const std::string& base_run_path,
                         std::ostream& out) {
    RunFile base = load_run_file(base_run_path);
    auto base_outcomes = outcomes_of(base.records);
    auto failures = extract_failures(base_outcomes, Level::prediction);

    Corpus corpus = load_corpus(cfg.inventory, cfg.train, cfg.test);
    require_file(cfg.kb_path, "knowledge base (run build-kb first)");
    KnowledgeBase kb = load_kb(cfg.kb_path);
    TemplateSet templates = load_templates(cfg.template_dir);

    std::map<std::string, const WsdInstance*> by_id;
    for (const auto& inst : corpus.test) by_id[inst.instance_id] = &inst;
    std::vector<WsdInstance> rerun_set;
    for (const auto& id : failures) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError("base run instance '" + id + "' not found in the test file " +
                            cfg.test);
        rerun_set.push_back(*it->second);
    }

    CornerSummary summary;
    summary.prior_failures = failures.size();

    std::vector<RunRecord> records;
    if (!rerun_set.empty()) {
        std::shared_ptr<ResponseCache> cache;
        Gateway gateway = make_gateway(cfg, cache);
        PipelineResult pipeline =
            run_instances(cfg, rerun_set, kb, corpus.inventory, templates, gateway);
        if (pipeline.terminal_error) {
            out << "ABORTED (partial output): " << *pipeline.terminal_error << '\n';
            pipeline.rethrow();
        }
        records = std::move(pipeline.records);
    }
    auto rerun_outcomes = outcomes_of(records);
    summary.corrected = static_cast<std::size_t>(
        std::count_if(rerun_outcomes.begin(), rerun_outcomes.end(),
                      [](const Outcome& o) { return o.prediction_correct; }));
    summary.still_failing = summary.prior_failures - summary.corrected;
    summary.cell = std::to_string(summary.corrected) + " (" +
                   (summary.prior_failures
                        ? format_ratio_2dp(static_cast<long long>(summary.corrected),
                                           static_cast<long long>(summary.prior_failures))
                        : std::string("0.00")) +
                   ")";

    RunMeta meta;
    meta.created_at = utc_timestamp();
    meta.seed = cfg.seed;
    meta.config = config_to_json(cfg);
    meta.config["base_run"] = base_run_path;
    meta.template_digests = digest_templates(templates);
    meta.parse_failures = static_cast<long>(std::count_if(
        records.begin(), records.end(), [](const RunRecord& r) { return r.parse_failure; }));
    std::string path = run_file_path(cfg, "corner_" + to_string(cfg.strategy) + ".jsonl");
    if (!records.empty()) write_run_file(path, meta, records);
    summary.run_path = records.empty() ? "" : path;

    out << "prior prediction-level failures: " << summary.prior_failures << '\n';
    out << "corrected by " << to_string(cfg.strategy) << ": " << summary.cell << '\n';
    out << "still failing: " << summary.still_failing << '\n';
    if (!summary.run_path.empty()) out << "corner run file: " << summary.run_path << '\n';
    return summary;
}

void cmd_cache_inspect(const std::string& cache_path, std::ostream& out) {
    auto records = ResponseCache::read_all(cache_path);
    std::map<std::string, std::size_t> per_model;
    long prompt_tokens = 0, completion_tokens = 0;
    for (const auto& r : records) {
        ++per_model[r.model_key];
        prompt_tokens += r.prompt_tokens;
        completion_tokens += r.completion_tokens;
    }
    out << "cache file: " << cache_path << '\n';
    out << "entries: " << records.size() << '\n';
    for (const auto& [model, count] : per_model) out << "  " << model << ": " << count << '\n';
    out << "prompt tokens: " << prompt_tokens << ", completion tokens: " << completion_tokens
        << '\n';
}

void cmd_cache_prune(const std::string& cache_path, std::optional<std::string> keep_model,
                     std::optional<int> max_age_days, std::ostream& out) {
    ResponseCache cache(cache_path);
    std::string cutoff;
    if (max_age_days) {
        std::time_t now = std::time(nullptr);
        std::time_t oldest = now - static_cast<std::time_t>(*max_age_days) * 24 * 3600;
        std::tm tm{};
        gmtime_r(&oldest, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        cutoff = buf;  // ISO-8601 compares lexicographically
    }
    std::size_t dropped = cache.prune([&](const CacheRecord& r) {
        if (keep_model && r.model_key != *keep_model) return false;
        if (max_age_days && r.created_at < cutoff) return false;
        return true;
    });
    out << "pruned " << dropped << " entries; " << cache.size() << " remain\n";
}

// ---------------------------------------------------------------------------
// argv dispatch

namespace {

RunConfig config_from_cli(const std::string& config_path, const std::string& strategy,
                          const std::string& model, std::optional<std::uint64_t> seed,
                          const std::string& quotas, const std::string& replay,
                          const std::string& out_dir, const std::string& templates) {
    RunConfig cfg = load_config(config_path);
    if (!strategy.empty()) {
        auto s = strategy_from_string(strategy);
        if (!s) throw ConfigError("unknown strategy: " + strategy);
        cfg.strategy = *s;
    }
    if (!model.empty()) cfg.model.model_key = model;
    if (seed) cfg.seed = *seed;
    if (!quotas.empty()) cfg.quotas = parse_quotas(quotas);
    if (!replay.empty()) cfg.replay_path = replay;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!templates.empty()) cfg.template_dir = templates;
    return cfg;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Word-sense-disambiguation benchmark harness"};
    app.require_subcommand(1);

    std::string config_path, strategy, model, quotas, replay, out_dir, templates;
    std::optional<std::uint64_t> seed;
    auto add_config_flags = [&](CLI::App* cmd, bool config_required = true) {
        cmd->add_option("--config", config_path, "config JSON file")->required(config_required);
        cmd->add_option("--strategy", strategy, "strategy override");
        cmd->add_option("--model", model, "model_key override");
        cmd->add_option("--seed", seed, "seed override");
        cmd->add_option("--quotas", quotas,
                        "quota override, e.g. noun=400,verb=300 (unlisted POS become 0)");
        cmd->add_option("--replay", replay, "replay fixture path (offline run)");
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--templates", templates, "template override directory");
    };

    auto* build = app.add_subcommand("build-kb", "build the trie knowledge base");
    add_config_flags(build);

    auto* sample = app.add_subcommand("sample", "write the seeded evaluation sample");
    std::string sample_out = "sample.tsv";
    add_config_flags(sample);
    sample->add_option("--file", sample_out, "output instance file");

    auto* run = app.add_subcommand("run", "disambiguate the sampled evaluation set");
    add_config_flags(run);

    auto* score = app.add_subcommand("score", "score one or more run files");
    std::vector<std::string> score_paths;
    std::string score_out;
    score->add_option("runs", score_paths, "run files")->required()->expected(-1);
    score->add_option("--out", score_out, "directory for report.txt/report.csv");

    auto* compare = app.add_subcommand("compare", "McNemar comparison of two runs");
    std::vector<std::string> compare_paths;
    compare->add_option("runs", compare_paths, "two run files")->required()->expected(2);

    auto* corner = app.add_subcommand("corner", "rerun a base run's failures");
    std::string base_run;
    add_config_flags(corner);
    corner->add_option("--base", base_run, "base run file")->required();

    auto* cache = app.add_subcommand("cache", "inspect or prune the response cache");
    cache->require_subcommand(1);
    std::string cache_path;
    auto* inspect = cache->add_subcommand("inspect", "summarize cache contents");
    inspect->add_option("path", cache_path, "cache file")->required();
    auto* prune = cache->add_subcommand("prune", "drop cache entries");
    std::string prune_path, keep_model;
    std::optional<int> max_age_days;
    prune->add_option("path", prune_path, "cache file")->required();
    prune->add_option("--keep-model", keep_model, "drop entries of other models");
    prune->add_option("--max-age-days", max_age_days, "drop entries older than N days");

    std::vector<const char*> argv;
    argv.push_back("wsd");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (build->parsed()) {
            cmd_build_kb(config_from_cli(config_path, strategy, model, seed, quotas, replay,
                                         out_dir, templates),
                         out);
        } else if (sample->parsed()) {
            cmd_sample(config_from_cli(config_path, strategy, model, seed, quotas, replay,
                                       out_dir, templates),
                       sample_out, out);
        } else if (run->parsed()) {
            cmd_run(config_from_cli(config_path, strategy, model, seed, quotas, replay,
                                    out_dir, templates),
                    out);
        } else if (score->parsed()) {
            cmd_score(score_paths,
                      score_out.empty() ? std::nullopt : std::optional<std::string>(score_out),
                      out);
        } else if (compare->parsed()) {
            cmd_compare(compare_paths[0], compare_paths[1], out);
        } else if (corner->parsed()) {
            cmd_corner(config_from_cli(config_path, strategy, model, seed, quotas, replay,
                                       out_dir, templates),
                       base_run, out);
        } else if (inspect->parsed()) {
            cmd_cache_inspect(cache_path, out);
        } else if (prune->parsed()) {
            cmd_cache_prune(prune_path,
                            keep_model.empty() ? std::nullopt
                                               : std::optional<std::string>(keep_model),
                            max_age_days, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const ProviderTerminalError& e) {
        err << "provider error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace wsd
