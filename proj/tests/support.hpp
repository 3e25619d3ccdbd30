#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coevol/batch.hpp"
#include "coevol/config.hpp"
#include "coevol/gateway.hpp"
#include "coevol/mock_backend.hpp"
#include "coevol/model.hpp"

namespace coevol::testing {

using nlohmann::json;

#ifndef COEVOL_GOLDEN_DIR
#define COEVOL_GOLDEN_DIR "golden"
#endif

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string golden(const std::string& name)
{
    return read_file(std::filesystem::path(COEVOL_GOLDEN_DIR) / name);
}

/// Fresh scratch directory removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("coevol-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline IftSample fixture_sample(bool with_input = true)
{
    IftSample s;
    s.id = "fx";
    s.instruction = "Give three tips for staying healthy.";
    if (with_input) s.input = "Keep each tip short.";
    s.response = "1. Eat vegetables.\n2. Sleep eight hours.\n3. Walk daily.";
    return s;
}

/// Conversation with `n` turns; texts are "u<i>" / "a<i>" with 0-based i.
inline IftSample conversation(int n, const std::string& id = "conv")
{
    IftSample s;
    s.id = id;
    for (int i = 0; i < n; ++i) {
        s.turns.push_back({"u" + std::to_string(i), "a" + std::to_string(i), i});
    }
    return s;
}

/// Per-round judge outcome in a scripted trajectory.
enum class Verdict { Win, Loss, Tie };

/// Forward and reverse judge replies realising `v` for the edited response.
inline std::pair<std::string, std::string> judge_replies(Verdict v)
{
    switch (v) {
    case Verdict::Win: return {"<assistant 2>\nThe second one is better. MARK-JDG-R{round}-{sample_id}", "<assistant 1>\nThe first one is better. MARK-JDG-R{round}-{sample_id}"};
    case Verdict::Loss: return {"<assistant 1>\nThe first one is better. MARK-JDG-R{round}-{sample_id}", "<assistant 2>\nThe second one is better. MARK-JDG-R{round}-{sample_id}"};
    case Verdict::Tie: break;
    }
    return {"<equal>\nBoth are fine. MARK-JDG-R{round}-{sample_id}", "<equal>\nBoth are fine. MARK-JDG-R{round}-{sample_id}"};
}

/// Mock script for the full loop. Every agent reply names its stage and
/// round so tests can trace where text came from. `verdicts[k]` drives
/// round k+1; later rounds reuse the last entry.
inline json loop_script(const std::vector<Verdict>& verdicts, int latency_ms = 0)
{
    json entries = json::array();
    // round 0 leaves the entry unkeyed by round.
    auto add = [&](const char* role, const char* stage, int round, const std::string& reply) {
        json e = {{"role", role}, {"stage", stage}, {"reply", reply}};
        if (round > 0) e["round"] = round;
        entries.push_back(e);
    };
    add("positive", "round1", 0, "MARK-POSPRED-R{round}-{sample_id} The response is accurate.");
    add("critical", "round1", 0, "MARK-CRTPRED-R{round}-{sample_id} The response lacks detail.");
    add("positive", "round2", 0, "MARK-POSFREE-R{round}-{sample_id} The critique is partly fair.");
    add("critical", "round2", 0, "MARK-CRTFREE-R{round}-{sample_id} The defence is weak.");
    add("advisor", "advise", 0,
        "Add detail MARK-ADV-R{round}-{sample_id}.\nGive an example.\nKeep it concise.");
    add("editor", "edit", 0, "EDIT-R{round}-{sample_id}");
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const auto [fwd, rev] = judge_replies(verdicts[i]);
        const bool last = i + 1 == verdicts.size();
        const int round = last ? 0 : static_cast<int>(i) + 1;
        add("judge", "forward", round, fwd);
        add("judge", "reverse", round, rev);
    }
    return {{"latency_ms", latency_ms}, {"entries", entries}};
}

/// Round-1 verdict for one sample overriding the default plan.
inline void add_sample_verdict(json& script, const std::string& sample_id, Verdict v)
{
    const auto [fwd, rev] = judge_replies(v);
    script["entries"].push_back({{"role", "judge"}, {"stage", "forward"}, {"round", 1}, {"sample", sample_id}, {"reply", fwd}});
    script["entries"].push_back({{"role", "judge"}, {"stage", "reverse"}, {"round", 1}, {"sample", sample_id}, {"reply", rev}});
}

inline RetryPolicy instant_retry()
{
    RetryPolicy p;
    p.initial_backoff = std::chrono::milliseconds(0);
    p.max_backoff = std::chrono::milliseconds(0);
    return p;
}

/// Alpaca-style array with `n` records s1..sn.
inline std::string alpaca_dataset(int n)
{
    json arr = json::array();
    for (int i = 1; i <= n; ++i) {
        const auto k = std::to_string(i);
        arr.push_back({{"id", "s" + k},
                       {"instruction", "Instruction " + k},
                       {"input", i % 2 == 0 ? "" : "Input " + k},
                       {"output", "Original answer number " + k}});
    }
    return arr.dump(2);
}

/// Ten-sample scripted run setup: dataset, mock script and config in `dir`.
/// Sample verdicts vary so the outputs are not uniform.
inline RunConfig batch_fixture(const std::filesystem::path& dir, int samples = 10)
{
    write_file(dir / "data.json", alpaca_dataset(samples));
    auto script = loop_script({Verdict::Win, Verdict::Loss});
    for (int i = 1; i <= samples; ++i) {
        if (i % 3 == 0) add_sample_verdict(script, "s" + std::to_string(i), Verdict::Tie);
    }
    write_file(dir / "mock.json", script.dump(2));
    RunConfig c;
    c.dataset_path = dir / "data.json";
    c.backend.kind = BackendKind::ScriptedMock;
    c.backend.mock_script = dir / "mock.json";
    c.backend.retry = instant_retry();
    c.out_dir = dir / "out";
    return c;
}

inline bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}

/// All message texts of a recorded call, concatenated.
inline std::string request_text(const ScriptedBackend::RecordedCall& call)
{
    std::string all;
    for (const auto& m : call.messages) {
        all += m.text;
        all += '\n';
    }
    return all;
}

}  // namespace coevol::testing
