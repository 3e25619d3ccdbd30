#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "coevol/gateway.hpp"

namespace coevol {

/// Deterministic offline backend driven by a script document.
///
/// Script layout:
///
///     {
///       "latency_ms": 0,
///       "entries": [
///         {"role": "advisor", "stage": "advise", "round": 1,
///          "sample": "s1", "turn": 0,
///          "replies": ["first call", "second call"],
///          "fail": ["transient"]}
///       ]
///     }
///
/// `role` is required; `stage`, `round`, `sample` and `turn` are optional
/// and an omitted field matches anything. The matching entry with the most
/// fields set wins (earliest on ties). `reply` may be used for a single
/// reply. Each concrete call key keeps its own counter: the first
/// `fail.size()` calls throw the listed failures (`transient`, `auth`,
/// `malformed`, `permanent`), later calls walk `replies`, repeating the last
/// one. `fail_always` makes every call fail. Reply text may use
/// `{sample_id}`, `{round}` and `{turn}`.
class ScriptedBackend : public ChatBackend {
public:
    struct RecordedCall {
        CallTag tag;
        std::vector<Message> messages;
        std::chrono::steady_clock::time_point start;
        std::chrono::steady_clock::time_point end;
        bool failed = false;
    };

    explicit ScriptedBackend(const nlohmann::json& script);

    static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path);
    static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);

    std::string complete_once(const CompletionRequest& request) override;

    [[nodiscard]] std::vector<RecordedCall> calls() const;
    [[nodiscard]] std::size_t call_count() const;
    /// Calls whose tag names this sample.
    [[nodiscard]] std::size_t call_count(const std::string& sample_id) const;
    void clear_log();

private:
    struct Entry {
        std::optional<Role> role;
        std::optional<Stage> stage;
        std::optional<int> round;
        std::optional<std::string> sample;
        std::optional<int> turn;
        std::vector<std::string> replies;
        std::vector<std::string> failures;
        std::optional<std::string> fail_always;

        [[nodiscard]] bool matches(const CallTag& tag) const;
        [[nodiscard]] int specificity() const;
    };

    using Key = std::tuple<Role, Stage, int, std::string, int>;

    std::vector<Entry> entries_;
    std::chrono::milliseconds latency_{0};

    mutable std::mutex mu_;
    std::map<Key, std::size_t> counters_;
    std::vector<RecordedCall> log_;
};

}  // namespace coevol
