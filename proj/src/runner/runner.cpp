#include "runner/runner.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "checkpoint/checkpoint.hpp"
#include "datasets/loaders.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace cotaudit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bounded worker pool over [0, n). Results land in caller-owned slots, so
// the fold after join is deterministic regardless of completion order.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<PromptPair> load_dataset(const RunConfig& config) {
    switch (config.dataset_kind) {
        case DatasetKind::strategyqa: return load_strategyqa(config.dataset_path, config.n);
        case DatasetKind::truthfulqa: return load_truthfulqa(config.dataset_path, config.n);
        case DatasetKind::gsm8k: return load_gsm8k(config.dataset_path, config.n);
    }
    throw_config("unreachable dataset kind");
}

std::string instance_key(const PromptPair& pair) {
    return pair.answer_kind == AnswerKind::single
               ? pair.id
               : pair.id + "/" + answer_kind_name(pair.answer_kind);
}

}  // namespace

AuditRunResult run_audit(const RunConfig& config) {
    auto [model_config, params] = load_checkpoint(config.model_dir);
    const Gpt2Model model(model_config, std::move(params));
    BpeTokenizer tokenizer = BpeTokenizer::from_model_dir(config.model_dir);

    const std::vector<PromptPair> pairs = load_dataset(config);

    struct Slot {
        std::optional<AuditRecord> record;
        std::optional<SkippedInstance> skipped;
    };
    std::vector<Slot> slots(pairs.size());
    const AblationFlags ablations{config.ablate_placebo, config.ablate_boundary};

    std::mutex log_mutex;
    std::atomic<int> done{0};
    parallel_for(static_cast<int>(pairs.size()), config.workers, [&](int i) {
        const PromptPair& pair = pairs[static_cast<size_t>(i)];
        const std::uint64_t instance_seed =
            derive_seed(config.seed, instance_key(pair));
        Slot& slot = slots[static_cast<size_t>(i)];
        try {
            slot.record = audit_instance(model, tokenizer, pair, config.cmi, ablations,
                                         instance_seed, config.model_id);
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "[" << ++done << "/" << pairs.size() << "] "
                      << instance_key(pair)
                      << " cmi_mean=" << slot.record->cmi_mean
                      << " baseline_logp=" << slot.record->baseline_logp << "\n";
        } catch (const Error& e) {
            if (e.code() == ErrorCode::invalid_argument) {
                slot.skipped = SkippedInstance{instance_key(pair), e.what()};
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cerr << "[" << ++done << "/" << pairs.size() << "] "
                          << instance_key(pair) << " SKIPPED: " << e.what() << "\n";
            } else {
                throw;
            }
        }
    });

    RunReport report;
    for (Slot& slot : slots) {
        if (slot.record) report.records.push_back(std::move(*slot.record));
        if (slot.skipped) report.skipped.push_back(std::move(*slot.skipped));
    }
    std::sort(report.records.begin(), report.records.end(),
              [](const AuditRecord& a, const AuditRecord& b) {
                  if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
                  return static_cast<int>(a.answer_kind) < static_cast<int>(b.answer_kind);
              });
    if (report.records.empty()) {
        throw_dataset("no instance produced a record (all skipped)");
    }
    report.summary = summarize_run(report.records, model_config.n_layers);

    report.meta.model_id = config.model_id;
    report.meta.dataset_kind = dataset_kind_name(config.dataset_kind);
    report.meta.dataset_path = config.dataset_path;
    report.meta.n = config.n;
    report.meta.seed = config.seed;
    report.meta.config_hash = config_hash(config.to_json());
    report.meta.timestamp = utc_timestamp();

    AuditRunResult result;
    result.run_dir = (fs::path(config.out_dir) /
                      (report.meta.timestamp + "_" + report.meta.config_hash))
                         .string();
    write_run_report(report, result.run_dir);

    const SummaryRow row{config.model_id, report.summary};
    result.summary_csv = render_summary_table(std::span(&row, 1));
    result.report = std::move(report);
    return result;
}

BehaviorRunResult run_behavior(const BehaviorConfig& config) {
    const ChatClient client(config.endpoint);
    const std::vector<PatternCategory> categories =
        config.patterns_path.empty() ? default_categories()
                                     : load_categories(config.patterns_path);
    const RiskScorer scorer(categories, config.weights);

    struct Task {
        const BehaviorPrompt* prompt;
        ElicitMode mode;
    };
    std::vector<Task> tasks;
    for (const BehaviorPrompt& p : config.prompts) {
        tasks.push_back({&p, ElicitMode::normal});
        tasks.push_back({&p, ElicitMode::audit_aware});
    }

    std::vector<ScoredSample> scored(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), config.workers, [&](int i) {
        const Task& task = tasks[static_cast<size_t>(i)];
        BehaviorSample sample =
            client.elicit(task.prompt->id, task.prompt->text, task.mode);
        ScoredSample& out = scored[static_cast<size_t>(i)];
        if (!sample.parse_failed && !sample.cot.empty()) {
            out.report = scorer.score(sample, task.prompt->text);
        } else {
            sample.parse_failed = true;
        }
        out.sample = std::move(sample);
    });

    const size_t failed = static_cast<size_t>(
        std::count_if(scored.begin(), scored.end(),
                      [](const ScoredSample& s) { return s.sample.parse_failed; }));
    if (failed == scored.size()) {
        throw_endpoint("no elicited sample could be parsed");
    }

    const ModeComparison comparison = compare_modes(scored);

    json samples = json::array();
    for (const ScoredSample& s : scored) {
        json entry{{"prompt_id", s.sample.prompt_id},
                   {"mode", elicit_mode_name(s.sample.mode)},
                   {"parse_failed", s.sample.parse_failed},
                   {"cot", s.sample.cot},
                   {"answer", s.sample.answer}};
        if (!s.sample.parse_failed) {
            entry["report"] = {{"category_hits", s.report.category_hits},
                               {"coherence_prompt_cot", s.report.coherence_prompt_cot},
                               {"coherence_cot_answer", s.report.coherence_cot_answer},
                               {"compression_ratio", s.report.compression_ratio},
                               {"template_flag", s.report.template_flag},
                               {"risk_score", s.report.risk_score}};
        }
        samples.push_back(std::move(entry));
    }
    json deltas = json::array();
    for (const ModeDelta& d : comparison.per_prompt) {
        deltas.push_back(json{{"prompt_id", d.prompt_id},
                              {"risk_delta", d.risk_delta},
                              {"hits_delta", d.hits_delta},
                              {"coherence_delta", d.coherence_delta},
                              {"compression_delta", d.compression_delta}});
    }

    const json config_json = config.to_json();
    BehaviorRunResult result;
    result.report = json{
        {"meta",
         {{"endpoint_model", config.endpoint.model},
          {"config_hash", config_hash(config_json)},
          {"timestamp", utc_timestamp()},
          {"n_prompts", config.prompts.size()},
          {"schema_version", 1}}},
        {"samples", std::move(samples)},
        {"comparison",
         {{"per_prompt", std::move(deltas)},
          {"mean_risk_delta", comparison.mean_risk_delta},
          {"mean_hits_delta", comparison.mean_hits_delta},
          {"mean_coherence_delta", comparison.mean_coherence_delta},
          {"mean_compression_delta", comparison.mean_compression_delta},
          {"dropped_pairs", comparison.dropped_pairs}}}};

    result.run_dir =
        (fs::path(config.out_dir) /
         (result.report["meta"]["timestamp"].get<std::string>() + "_" +
          result.report["meta"]["config_hash"].get<std::string>()))
            .string();
    std::error_code ec;
    fs::create_directories(result.run_dir, ec);
    if (ec) throw_io("cannot create output directory: " + result.run_dir);
    std::ofstream f(fs::path(result.run_dir) / "behavior.json");
    if (!f) throw_io("cannot write behavior.json under " + result.run_dir);
    f << result.report.dump(2) << "\n";
    return result;
}

std::string summarize_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw_invalid("summarize: no run directories given");
    std::vector<SummaryRow> rows;
    for (const std::string& dir : run_dirs) {
        const fs::path path = fs::path(dir) / "run.json";
        std::ifstream f(path);
        if (!f) throw_io("cannot open " + path.string());
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw_io("run.json malformed in " + dir + ": " + e.what());
        }
        const int version = j.at("meta").value("schema_version", 0);
        if (version != 1) {
            throw_config("incompatible run.json schema version " +
                         std::to_string(version) + " in " + dir);
        }
        RunReport report = run_report_from_json(j);
        // recompute from the records rather than trusting the stored summary
        ModelSummary summary =
            report.records.empty()
                ? report.summary
                : summarize_run(report.records, report.summary.n_layers);
        rows.push_back({report.meta.model_id, std::move(summary)});
    }
    return render_summary_table(rows);
}

}  // namespace cotaudit
