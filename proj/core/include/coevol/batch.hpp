#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coevol/config.hpp"
#include "coevol/dataset.hpp"
#include "coevol/gateway.hpp"
#include "coevol/report.hpp"

namespace coevol {

struct BatchOptions {
    std::string run_id;
    bool resume = false;
    /// Stop once this many samples have been written in this session.
    std::optional<std::size_t> stop_after;
    /// Replaces the backend named in the config.
    std::shared_ptr<ChatBackend> backend;
    Sleeper sleeper;
    std::ostream* progress = nullptr;
};

struct BatchResult {
    RunReport report;
    RunPaths paths;
    std::size_t processed = 0;
    bool complete = false;
    std::vector<LoadIssue> issues;
    long long backend_attempts = 0;
};

/// Evolves a dataset with `config.concurrency` workers. Results are written
/// in input order by a single writer, with a checkpoint after every sample,
/// so an interrupted run can be resumed under the same run id.
///
/// Throws ValidationError for a bad config, DatasetError for unreadable
/// input, refused resumes and output failures.
BatchResult run_batch(const RunConfig& config, const BatchOptions& options);

/// Built-in prompts plus any overrides from `config.prompt_dir`.
PromptCatalog catalog_for(const RunConfig& config);

}  // namespace coevol
