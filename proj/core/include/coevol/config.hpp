#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace coevol {

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{4000};

    /// Delay before attempt `attempt + 1`, for a 1-based failed `attempt`.
    [[nodiscard]] std::chrono::milliseconds backoff_after(int attempt) const;

    bool operator==(const RetryPolicy&) const = default;
};

enum class BackendKind { HttpChatApi, ScriptedMock };

/// Where completions come from. Credentials are referenced by environment
/// variable name only.
struct BackendDescriptor {
    BackendKind kind = BackendKind::ScriptedMock;
    std::string endpoint;
    std::string model;
    std::string auth_env;
    bool supports_system_prompt = true;
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
    std::filesystem::path mock_script;

    bool operator==(const BackendDescriptor&) const = default;
};

enum class DatasetFormat { Auto, AlpacaSingleTurn, ConversationMultiTurn };

/// Which agents take part. The defaults run the full loop; the other
/// combinations reproduce the reduced pipelines (edit only, advise + edit
/// with or without the response shown, debate + advise + edit).
struct StageToggles {
    bool debate = true;
    bool advise = true;
    bool judge = true;
    bool advisor_sees_response = true;

    bool operator==(const StageToggles&) const = default;
};

struct RunConfig {
    int max_rounds = 3;
    int max_tokens = 1000;
    double temperature = 0.0;
    double top_p = 1.0;
    int history_window = 3;
    int concurrency = 4;

    BackendDescriptor backend;
    StageToggles stages;
    /// Condition later conversation turns on already-refined earlier turns.
    bool refined_context = true;

    std::filesystem::path dataset_path;
    DatasetFormat format = DatasetFormat::Auto;
    std::filesystem::path out_dir = "out";
    std::filesystem::path prompt_dir;
    bool strict = false;
    std::string token_counter = "whitespace";

    /// Throws ValidationError describing the first offending field.
    void validate() const;

    /// Stable hex digest of every field that can change run outputs.
    /// Concurrency and paths of output locations are excluded.
    [[nodiscard]] std::string digest() const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;

    /// Applies keys from `j` over `base`. Relative paths resolve against
    /// `base_dir`. Unknown keys and inline credentials are rejected.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base,
                               const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
};

std::string to_string(BackendKind k);
std::string to_string(DatasetFormat f);
BackendKind backend_kind_from_string(const std::string& s);
DatasetFormat dataset_format_from_string(const std::string& s);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view data);

}  // namespace coevol
