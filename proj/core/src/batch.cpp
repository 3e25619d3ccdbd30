#include "coevol/batch.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "coevol/evolution.hpp"

namespace coevol {

namespace fs = std::filesystem;

PromptCatalog catalog_for(const RunConfig& config)
{
    auto catalog = PromptCatalog::builtin();
    if (!config.prompt_dir.empty()) {
        catalog.load_overrides(config.prompt_dir);
    }
    return catalog;
}

namespace {

void truncate_to(const fs::path& p, std::uintmax_t size)
{
    if (fs::exists(p) && fs::file_size(p) != size) {
        fs::resize_file(p, size);
    }
}

void touch(const fs::path& p)
{
    std::ofstream out(p, std::ios::binary | std::ios::app);
    if (!out) {
        throw DatasetError("cannot create " + p.string());
    }
}

}  // namespace

BatchResult run_batch(const RunConfig& config, const BatchOptions& options)
{
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    if (options.run_id.empty()) {
        throw ValidationError("run id must not be empty");
    }

    BatchResult result;
    result.paths = RunPaths::under(config.out_dir, options.run_id);
    const auto& paths = result.paths;

    auto dataset = load_dataset(config.dataset_path, config.format, config.strict);
    result.issues = dataset.issues;
    const auto catalog = catalog_for(config);
    const auto counter = make_token_counter(config.token_counter);

    Checkpoint checkpoint;
    if (options.resume) {
        checkpoint = Checkpoint::load(paths.checkpoint);
        if (checkpoint.config_digest != config.digest()) {
            throw DatasetError("cannot resume run '" + options.run_id +
                               "': the configuration changed since it started (digest " +
                               checkpoint.config_digest + " vs " + config.digest() + ")");
        }
        if (checkpoint.total != dataset.records.size()) {
            throw DatasetError("cannot resume run '" + options.run_id + "': the dataset now has " +
                               std::to_string(dataset.records.size()) + " records, the run had " +
                               std::to_string(checkpoint.total));
        }
        truncate_to(paths.evolved, checkpoint.evolved_offset);
        truncate_to(paths.traces, checkpoint.trace_offset);
    } else {
        if (fs::exists(paths.checkpoint)) {
            throw DatasetError("run '" + options.run_id + "' already exists under " + paths.dir.string() +
                               "; pass --resume to continue it");
        }
        fs::create_directories(paths.dir);
        fs::remove(paths.evolved);
        fs::remove(paths.traces);
        checkpoint.run_id = options.run_id;
        checkpoint.config_digest = config.digest();
        checkpoint.total = dataset.records.size();
        checkpoint.save(paths.checkpoint);
    }
    touch(paths.evolved);
    touch(paths.traces);

    const std::set<std::string> completed(checkpoint.completed.begin(), checkpoint.completed.end());
    std::vector<const LoadedRecord*> pending;
    for (const auto& rec : dataset.records) {
        if (!completed.contains(rec.sample.id)) {
            pending.push_back(&rec);
        }
    }

    auto backend = options.backend ? options.backend : make_backend(config.backend);
    Gateway gateway(backend, config.backend.retry, config.concurrency,
                    {config.max_tokens, config.temperature, config.top_p}, options.sleeper);
    Evolver evolver(gateway, catalog, config);

    const auto write_limit = options.stop_after ? std::min(*options.stop_after, pending.size()) : pending.size();

    std::mutex mu;
    std::condition_variable ready;
    std::map<std::size_t, SampleOutcome> finished;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};

    auto worker = [&] {
        while (!stop.load()) {
            const auto i = next.fetch_add(1);
            if (i >= write_limit) break;
            SampleOutcome outcome;
            try {
                outcome = evolver.run(pending[i]->sample);
            } catch (const std::exception& e) {
                outcome.sample_id = pending[i]->sample.id;
                outcome.multi_turn = pending[i]->sample.is_multi_turn();
                outcome.status = TraceStatus::Failed;
                outcome.error = e.what();
            }
            {
                std::lock_guard lock(mu);
                finished.emplace(i, std::move(outcome));
            }
            ready.notify_all();
        }
    };

    const auto worker_count = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency),
                                                    std::max<std::size_t>(write_limit, 1));
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < worker_count && write_limit > 0; ++w) {
        workers.emplace_back(worker);
    }

    std::ofstream evolved_out(paths.evolved, std::ios::binary | std::ios::app);
    std::ofstream trace_out(paths.traces, std::ios::binary | std::ios::app);
    if (!evolved_out || !trace_out) {
        stop = true;
        throw DatasetError("cannot open outputs under " + paths.dir.string());
    }

    try {
        for (std::size_t i = 0; i < write_limit; ++i) {
            SampleOutcome outcome;
            {
                std::unique_lock lock(mu);
                ready.wait(lock, [&] { return finished.contains(i); });
                outcome = std::move(finished.at(i));
                finished.erase(i);
            }
            const auto& rec = *pending[i];
            evolved_out << to_line(evolved_record(rec, outcome)) << '\n';
            trace_out << to_line(to_json(outcome)) << '\n';
            evolved_out.flush();
            trace_out.flush();
            if (!evolved_out || !trace_out) {
                throw DatasetError("write failed under " + paths.dir.string());
            }
            checkpoint.completed.push_back(rec.sample.id);
            checkpoint.evolved_offset = static_cast<std::uintmax_t>(evolved_out.tellp());
            checkpoint.trace_offset = static_cast<std::uintmax_t>(trace_out.tellp());
            checkpoint.save(paths.checkpoint);
            ++result.processed;
            if (options.progress != nullptr) {
                int rounds = 0;
                for (const auto& t : outcome.traces) rounds = std::max(rounds, t.rounds_evolved);
                *options.progress << "[" << checkpoint.completed.size() << "/" << checkpoint.total << "] "
                                  << outcome.sample_id << ": " << to_string(outcome.status) << ", rounds evolved "
                                  << rounds << (outcome.error.empty() ? "" : " (" + outcome.error + ")") << '\n';
            }
        }
    } catch (...) {
        stop = true;
        evolved_out.close();
        trace_out.close();
        // Drop anything written past the last checkpoint.
        std::error_code ec;
        fs::resize_file(paths.evolved, checkpoint.evolved_offset, ec);
        fs::resize_file(paths.traces, checkpoint.trace_offset, ec);
        throw;
    }
    stop = true;
    workers.clear();

    result.complete = checkpoint.done();
    result.backend_attempts = gateway.total_attempts();
    evolved_out.close();
    trace_out.close();

    result.report = build_report(read_traces(paths.traces), *counter);
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream(paths.report) << result.report.to_json().dump(2) << '\n';
    return result;
}

}  // namespace coevol
