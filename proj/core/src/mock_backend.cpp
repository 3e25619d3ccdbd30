#include "coevol/mock_backend.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "coevol/model.hpp"

namespace coevol {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to)
{
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

[[noreturn]] void raise_failure(const std::string& kind, const CallTag& tag)
{
    const auto where = std::string(to_string(tag.role)) + "/" + std::string(to_string(tag.stage)) +
                       " round " + std::to_string(tag.round) + " sample '" + tag.sample_id + "'";
    if (kind == "transient") throw TransientError("scripted transient failure at " + where);
    if (kind == "auth") throw AuthError("scripted auth failure at " + where);
    if (kind == "malformed") throw MalformedReplyError("scripted malformed reply at " + where);
    throw BackendError("scripted permanent failure at " + where);
}

void check_failure_kind(const std::string& kind)
{
    if (kind != "transient" && kind != "auth" && kind != "malformed" && kind != "permanent") {
        throw ValidationError("mock script: unknown failure kind '" + kind + "'");
    }
}

}  // namespace

bool ScriptedBackend::Entry::matches(const CallTag& tag) const
{
    if (role && *role != tag.role) return false;
    if (stage && *stage != tag.stage) return false;
    if (round && *round != tag.round) return false;
    if (sample && *sample != tag.sample_id) return false;
    if (turn && (!tag.turn || *turn != *tag.turn)) return false;
    return true;
}

int ScriptedBackend::Entry::specificity() const
{
    return int(role.has_value()) + int(stage.has_value()) + int(round.has_value()) +
           int(sample.has_value()) + int(turn.has_value());
}

ScriptedBackend::ScriptedBackend(const nlohmann::json& script)
{
    try {
        if (!script.is_object()) {
            throw ValidationError("mock script: top level must be an object");
        }
        latency_ = std::chrono::milliseconds(script.value("latency_ms", 0));
        for (const auto& e : script.value("entries", nlohmann::json::array())) {
            Entry entry;
            if (!e.contains("role")) {
                throw ValidationError("mock script: every entry needs a role");
            }
            entry.role = role_from_string(e.at("role").get<std::string>());
            if (e.contains("stage")) entry.stage = stage_from_string(e.at("stage").get<std::string>());
            if (e.contains("round")) entry.round = e.at("round").get<int>();
            if (e.contains("sample")) entry.sample = e.at("sample").get<std::string>();
            if (e.contains("turn")) entry.turn = e.at("turn").get<int>();
            if (e.contains("reply")) entry.replies.push_back(e.at("reply").get<std::string>());
            if (e.contains("replies")) {
                for (const auto& r : e.at("replies")) entry.replies.push_back(r.get<std::string>());
            }
            if (e.contains("fail")) {
                for (const auto& f : e.at("fail")) {
                    entry.failures.push_back(f.get<std::string>());
                    check_failure_kind(entry.failures.back());
                }
            }
            if (e.contains("fail_always")) {
                entry.fail_always = e.at("fail_always").get<std::string>();
                check_failure_kind(*entry.fail_always);
            }
            if (entry.replies.empty() && !entry.fail_always) {
                throw ValidationError("mock script: entry for role '" + e.at("role").get<std::string>() +
                                      "' has no reply");
            }
            entries_.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("mock script: ") + e.what());
    } catch (const PromptError& e) {
        throw ValidationError(std::string("mock script: ") + e.what());
    }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("mock script: cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("mock script: " + path.string() + ": " + e.what());
    }
    return std::make_shared<ScriptedBackend>(j);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script)
{
    return std::make_shared<ScriptedBackend>(script);
}

std::string ScriptedBackend::complete_once(const CompletionRequest& request)
{
    RecordedCall rec{request.tag, request.messages, std::chrono::steady_clock::now(), {}, false};
    if (latency_.count() > 0) {
        std::this_thread::sleep_for(latency_);
    }

    const Entry* best = nullptr;
    for (const auto& e : entries_) {
        if (e.matches(request.tag) && (best == nullptr || e.specificity() > best->specificity())) {
            best = &e;
        }
    }

    std::size_t index = 0;
    {
        std::lock_guard lock(mu_);
        const Key key{request.tag.role, request.tag.stage, request.tag.round, request.tag.sample_id,
                      request.tag.turn.value_or(-1)};
        index = counters_[key]++;
    }

    auto record = [&](bool failed) {
        rec.end = std::chrono::steady_clock::now();
        rec.failed = failed;
        std::lock_guard lock(mu_);
        log_.push_back(rec);
    };

    if (best == nullptr) {
        record(true);
        throw BackendError("mock script has no entry for " + std::string(to_string(request.tag.role)) + "/" +
                           std::string(to_string(request.tag.stage)) + " round " +
                           std::to_string(request.tag.round));
    }
    if (best->fail_always) {
        record(true);
        raise_failure(*best->fail_always, request.tag);
    }
    if (index < best->failures.size()) {
        record(true);
        raise_failure(best->failures[index], request.tag);
    }
    const auto reply_index = std::min(index - best->failures.size(), best->replies.size() - 1);
    std::string reply = best->replies[reply_index];
    replace_all(reply, "{sample_id}", request.tag.sample_id);
    replace_all(reply, "{round}", std::to_string(request.tag.round));
    replace_all(reply, "{turn}", request.tag.turn ? std::to_string(*request.tag.turn) : "-");
    record(false);
    return reply;
}

std::vector<ScriptedBackend::RecordedCall> ScriptedBackend::calls() const
{
    std::lock_guard lock(mu_);
    return log_;
}

std::size_t ScriptedBackend::call_count() const
{
    std::lock_guard lock(mu_);
    return log_.size();
}

std::size_t ScriptedBackend::call_count(const std::string& sample_id) const
{
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(log_.begin(), log_.end(), [&](const RecordedCall& c) { return c.tag.sample_id == sample_id; }));
}

void ScriptedBackend::clear_log()
{
    std::lock_guard lock(mu_);
    log_.clear();
}

}  // namespace coevol
