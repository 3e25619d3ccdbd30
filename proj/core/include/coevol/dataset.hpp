#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coevol/config.hpp"
#include "coevol/model.hpp"

namespace coevol {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A malformed record noticed while loading.
struct LoadIssue {
    std::size_t index = 0;
    std::size_t line = 0;
    std::string message;
};

struct LoadedRecord {
    IftSample sample;
    /// The record as read, key order preserved, for pass-through output.
    nlohmann::ordered_json source;
    std::size_t index = 0;
    std::size_t line = 0;
};

/// Streams validated samples from a JSON array file or a JSON-lines file.
///
/// Single-turn records carry `instruction`/`input`/`output`; conversations
/// carry `conversations` (`from`/`value`) or `messages` (`role`/`content`).
/// With `Auto` the first record decides the format. In strict mode a
/// malformed record throws DatasetError; otherwise it is skipped and
/// listed in issues().
class DatasetReader {
public:
    DatasetReader(const std::filesystem::path& path, DatasetFormat format, bool strict);

    std::optional<LoadedRecord> next();

    [[nodiscard]] DatasetFormat format() const { return format_; }
    [[nodiscard]] const std::vector<LoadIssue>& issues() const { return issues_; }

private:
    struct Span {
        std::size_t begin;
        std::size_t end;
        std::size_t line;
    };

    void index_elements();
    void reject(std::size_t index, std::size_t line, const std::string& message);

    std::filesystem::path path_;
    DatasetFormat format_;
    bool strict_;
    std::string content_;
    std::vector<Span> spans_;
    std::size_t cursor_ = 0;
    std::set<std::string> seen_ids_;
    std::vector<LoadIssue> issues_;
};

struct LoadedDataset {
    DatasetFormat format = DatasetFormat::Auto;
    std::vector<LoadedRecord> records;
    std::vector<LoadIssue> issues;
};

LoadedDataset load_dataset(const std::filesystem::path& path, DatasetFormat format, bool strict);

/// Converts one source record; throws ValidationError on a bad shape.
IftSample sample_from_record(const nlohmann::ordered_json& record, DatasetFormat format, std::size_t index);

/// `record` with its responses replaced by the outcome's final responses.
/// Failed or partial outcomes pass the record through unchanged.
nlohmann::ordered_json evolved_record(const LoadedRecord& record, const SampleOutcome& outcome);

nlohmann::ordered_json to_json(const SampleOutcome& outcome);
SampleOutcome outcome_from_json(const nlohmann::json& j);

/// One JSON document per line, UTF-8 preserved, no trailing spaces.
std::string to_line(const nlohmann::ordered_json& j);

/// Reads a trace file. Malformed lines throw DatasetError naming the line.
std::vector<SampleOutcome> read_traces(const std::filesystem::path& path);

struct SuggestionRecord {
    std::string sample_id;
    std::optional<int> turn;
    int round = 1;
    int index = 0;
    std::string suggestion;
};

std::vector<SuggestionRecord> collect_suggestions(const std::vector<SampleOutcome>& outcomes);
nlohmann::ordered_json to_json(const SuggestionRecord& r);

struct Checkpoint {
    std::string run_id;
    std::string config_digest;
    std::vector<std::string> completed;
    std::uintmax_t evolved_offset = 0;
    std::uintmax_t trace_offset = 0;
    std::size_t total = 0;

    [[nodiscard]] bool done() const { return completed.size() >= total; }

    /// Atomic replace via a temporary file.
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

/// Output locations for one run id.
struct RunPaths {
    std::filesystem::path dir;
    std::filesystem::path evolved;
    std::filesystem::path traces;
    std::filesystem::path checkpoint;
    std::filesystem::path report;

    static RunPaths under(const std::filesystem::path& out_dir, const std::string& run_id);
};

}  // namespace coevol
