#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "coevol/batch.hpp"
#include "coevol/dataset.hpp"
#include "coevol/evolution.hpp"
#include "coevol/report.hpp"

namespace coevol::cli {

namespace {

struct RunFlags {
    std::string config_path;
    std::string dataset;
    std::string format;
    std::string out_dir;
    std::optional<int> max_rounds;
    std::optional<int> concurrency;
    std::string backend;
    std::string model;
    std::string endpoint;
    std::string mock_script;
    std::string prompt_dir;
    std::string token_counter;
    bool strict = false;
    bool dry_run = false;
    std::string resume;
    std::string run_id;
    bool no_debate = false;
    bool no_advise = false;
    bool no_judge = false;
    std::optional<bool> advisor_sees_response;
    std::optional<std::size_t> stop_after;
};

class RefusingBackend : public ChatBackend {
public:
    std::string complete_once(const CompletionRequest&) override
    {
        throw BackendError("dry run: no backend calls allowed");
    }
};

void add_config_flags(CLI::App& cmd, RunFlags& f)
{
    cmd.add_option("--config", f.config_path, "JSON run configuration");
    cmd.add_option("--dataset", f.dataset, "Input dataset (JSON array or JSON lines)");
    cmd.add_option("--format", f.format, "Dataset format")->check(CLI::IsMember({"auto", "alpaca", "conversation"}));
    cmd.add_option("--out-dir", f.out_dir, "Output directory");
    cmd.add_option("--max-rounds", f.max_rounds, "Maximum evolution rounds per response");
    cmd.add_option("--concurrency", f.concurrency, "Samples evolved in parallel");
    cmd.add_option("--backend", f.backend, "Completion backend")->check(CLI::IsMember({"http", "mock"}));
    cmd.add_option("--model", f.model, "Model name sent to the HTTP backend");
    cmd.add_option("--endpoint", f.endpoint, "Chat-completions URL");
    cmd.add_option("--mock-script", f.mock_script, "Scripted backend document");
    cmd.add_option("--prompt-dir", f.prompt_dir, "Directory of prompt overrides");
    cmd.add_option("--token-counter", f.token_counter, "Length measure for reports")
        ->check(CLI::IsMember({"whitespace", "utf8-chars"}));
    cmd.add_flag("--strict", f.strict, "Abort on malformed records and fail on failed samples");
    cmd.add_flag("--no-debate", f.no_debate, "Skip the debaters");
    cmd.add_flag("--no-advise", f.no_advise, "Skip the advisor (implies an editor-only pass)");
    cmd.add_flag("--no-judge", f.no_judge, "Accept the first edit without judging");
    cmd.add_option("--advisor-sees-response", f.advisor_sees_response,
                   "Show the current response to the advisor (true/false)");
}

RunConfig resolve_config(const RunFlags& f)
{
    RunConfig c = f.config_path.empty() ? RunConfig{} : RunConfig::load(f.config_path);
    if (!f.dataset.empty()) c.dataset_path = f.dataset;
    if (!f.format.empty()) c.format = dataset_format_from_string(f.format);
    if (!f.out_dir.empty()) c.out_dir = f.out_dir;
    if (f.max_rounds) c.max_rounds = *f.max_rounds;
    if (f.concurrency) c.concurrency = *f.concurrency;
    if (!f.backend.empty()) c.backend.kind = backend_kind_from_string(f.backend);
    if (!f.model.empty()) c.backend.model = f.model;
    if (!f.endpoint.empty()) c.backend.endpoint = f.endpoint;
    if (!f.mock_script.empty()) c.backend.mock_script = f.mock_script;
    if (!f.prompt_dir.empty()) c.prompt_dir = f.prompt_dir;
    if (!f.token_counter.empty()) c.token_counter = f.token_counter;
    if (f.strict) c.strict = true;
    if (f.no_debate) c.stages.debate = false;
    if (f.no_advise) {
        // Without an advisor the debate has no consumer.
        c.stages.advise = false;
        c.stages.debate = false;
    }
    if (f.no_judge) c.stages.judge = false;
    if (f.advisor_sees_response) c.stages.advisor_sees_response = *f.advisor_sees_response;
    return c;
}

std::string default_run_id()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "run-%Y%m%d-%H%M%S", &tm);
    return buf;
}

int dry_run(const RunConfig& config, std::ostream& out)
{
    config.validate();
    DatasetReader reader(config.dataset_path, config.format, config.strict);
    const auto first = reader.next();
    if (!first) {
        out << "dataset has no usable records\n";
        return kOk;
    }
    const auto catalog = catalog_for(config);
    Gateway gateway(std::make_shared<RefusingBackend>(), config.backend.retry, 1);
    Evolver evolver(gateway, catalog, config);
    const auto prompts = evolver.preview(first->sample);
    for (const auto& p : prompts) {
        out << "=== " << to_string(p.role) << " / " << to_string(p.stage) << " ===\n";
        out << "[role-play] " << p.system << "\n\n" << p.user << "\n\n";
    }
    out << "sample " << first->sample.id << ": " << prompts.size() << " prompts per round, 0 backend calls\n";
    return kOk;
}

int cmd_run(const RunFlags& f, std::ostream& out, std::ostream& err)
{
    const auto config = resolve_config(f);
    if (f.dry_run) {
        return dry_run(config, out);
    }
    BatchOptions opts;
    opts.resume = !f.resume.empty();
    opts.run_id = opts.resume ? f.resume : (f.run_id.empty() ? default_run_id() : f.run_id);
    opts.stop_after = f.stop_after;
    opts.progress = &err;
    const auto result = run_batch(config, opts);
    for (const auto& issue : result.issues) {
        err << "skipped: " << issue.message << '\n';
    }
    out << "run " << opts.run_id << (result.complete ? " complete" : " stopped early") << ", " << result.processed
        << " samples processed this session\n";
    out << "outputs: " << result.paths.evolved.string() << ", " << result.paths.traces.string() << '\n';
    out << result.report.to_text();
    if (config.strict && result.report.samples_failed > 0) {
        return kSampleFailures;
    }
    return kOk;
}

int cmd_stats(const std::string& traces, const std::string& counter_name, bool as_json, std::ostream& out)
{
    const auto counter = make_token_counter(counter_name);
    const auto report = build_report(read_traces(traces), *counter);
    if (as_json) {
        out << report.to_json().dump(2) << '\n';
    } else {
        out << report.to_text();
    }
    return kOk;
}

int cmd_export(const std::string& traces, const std::string& output, std::ostream& out)
{
    const auto records = collect_suggestions(read_traces(traces));
    std::ofstream file;
    std::ostream* sink = &out;
    if (!output.empty() && output != "-") {
        file.open(output, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw DatasetError("cannot write " + output);
        }
        sink = &file;
    }
    for (const auto& r : records) {
        *sink << to_line(to_json(r)) << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multi-agent debate/advise/edit/judge refinement of instruction-tuning data", "coevol"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "Evolve a dataset");
    add_config_flags(*run_cmd, run_flags);
    run_cmd->add_flag("--dry-run", run_flags.dry_run, "Render the first sample's prompts without calling a backend");
    run_cmd->add_option("--resume", run_flags.resume, "Resume an interrupted run by id");
    run_cmd->add_option("--run-id", run_flags.run_id, "Id for a new run (default: timestamp)");
    run_cmd->add_option("--stop-after", run_flags.stop_after, "Stop after writing N samples");

    std::string stats_traces;
    std::string stats_counter = "whitespace";
    bool stats_json = false;
    auto* stats_cmd = app.add_subcommand("stats", "Recompute run statistics from a trace file");
    stats_cmd->add_option("traces", stats_traces, "Trace file")->required();
    stats_cmd->add_option("--token-counter", stats_counter, "Length measure")
        ->check(CLI::IsMember({"whitespace", "utf8-chars"}));
    stats_cmd->add_flag("--json", stats_json, "Print JSON");

    std::string export_traces;
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export-suggestions", "Write one line per advisor suggestion");
    export_cmd->add_option("traces", export_traces, "Trace file")->required();
    export_cmd->add_option("-o,--out", export_out, "Output file (default: stdout)");

    RunFlags check_flags;
    auto* check_cmd = app.add_subcommand("validate-config", "Check a configuration and print it resolved");
    add_config_flags(*check_cmd, check_flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (run_cmd->parsed()) {
            return cmd_run(run_flags, out, err);
        }
        if (stats_cmd->parsed()) {
            return cmd_stats(stats_traces, stats_counter, stats_json, out);
        }
        if (export_cmd->parsed()) {
            return cmd_export(export_traces, export_out, out);
        }
        if (check_cmd->parsed()) {
            const auto config = resolve_config(check_flags);
            config.validate();
            out << config.to_json().dump(2) << '\n';
            out << "config digest " << config.digest() << '\n';
            return kOk;
        }
    } catch (const std::exception& e) {
        err << "coevol: " << e.what() << '\n';
        return kError;
    }
    return kUsage;
}

}  // namespace coevol::cli
