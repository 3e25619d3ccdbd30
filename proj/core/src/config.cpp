#include "coevol/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "coevol/model.hpp"

namespace coevol {

namespace fs = std::filesystem;
using nlohmann::json;

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const
{
    const double raw = static_cast<double>(initial_backoff.count()) *
                       std::pow(multiplier, std::max(0, attempt - 1));
    const double capped = std::min(raw, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

std::string to_string(BackendKind k)
{
    return k == BackendKind::HttpChatApi ? "http" : "mock";
}

std::string to_string(DatasetFormat f)
{
    switch (f) {
    case DatasetFormat::Auto: return "auto";
    case DatasetFormat::AlpacaSingleTurn: return "alpaca";
    case DatasetFormat::ConversationMultiTurn: return "conversation";
    }
    return "auto";
}

BackendKind backend_kind_from_string(const std::string& s)
{
    if (s == "http") return BackendKind::HttpChatApi;
    if (s == "mock") return BackendKind::ScriptedMock;
    throw ValidationError("backend kind must be 'http' or 'mock', got '" + s + "'");
}

DatasetFormat dataset_format_from_string(const std::string& s)
{
    if (s == "auto") return DatasetFormat::Auto;
    if (s == "alpaca") return DatasetFormat::AlpacaSingleTurn;
    if (s == "conversation") return DatasetFormat::ConversationMultiTurn;
    throw ValidationError("dataset format must be auto, alpaca or conversation, got '" + s + "'");
}

std::string fnv1a_hex(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
    if (max_rounds < 1) fail("max_rounds must be >= 1");
    if (max_tokens < 1) fail("max_tokens must be >= 1");
    if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature must be within [0, 2]");
    if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must be within (0, 1]");
    if (history_window < 0) fail("history_window must be >= 0");
    if (concurrency < 1) fail("concurrency must be >= 1");
    if (backend.retry.max_attempts < 1) fail("retry.max_attempts must be >= 1");
    if (backend.retry.initial_backoff.count() < 0 || backend.retry.max_backoff.count() < 0) {
        fail("retry backoff must be non-negative");
    }
    if (backend.retry.multiplier < 1.0) fail("retry.multiplier must be >= 1");
    if (backend.timeout.count() < 1) fail("backend timeout must be >= 1 s");
    if (backend.kind == BackendKind::HttpChatApi) {
        if (backend.endpoint.empty()) fail("http backend needs an endpoint");
        if (backend.model.empty()) fail("http backend needs a model name");
    } else if (backend.mock_script.empty()) {
        fail("mock backend needs a mock_script");
    }
    if (stages.debate && !stages.advise) fail("the debate stage requires the advise stage");
    if (token_counter != "whitespace" && token_counter != "utf8-chars") {
        fail("token_counter must be 'whitespace' or 'utf8-chars'");
    }
}

nlohmann::ordered_json RunConfig::to_json() const
{
    nlohmann::ordered_json j;
    j["max_rounds"] = max_rounds;
    j["max_tokens"] = max_tokens;
    j["temperature"] = temperature;
    j["top_p"] = top_p;
    j["history_window"] = history_window;
    j["concurrency"] = concurrency;
    j["backend"] = {
        {"kind", to_string(backend.kind)},
        {"endpoint", backend.endpoint},
        {"model", backend.model},
        {"auth_env", backend.auth_env},
        {"supports_system_prompt", backend.supports_system_prompt},
        {"timeout_seconds", backend.timeout.count()},
        {"retry",
         {{"max_attempts", backend.retry.max_attempts},
          {"initial_backoff_ms", backend.retry.initial_backoff.count()},
          {"multiplier", backend.retry.multiplier},
          {"max_backoff_ms", backend.retry.max_backoff.count()}}},
        {"mock_script", backend.mock_script.string()},
    };
    j["stages"] = {
        {"debate", stages.debate},
        {"advise", stages.advise},
        {"judge", stages.judge},
        {"advisor_sees_response", stages.advisor_sees_response},
    };
    j["multi_turn_context"] = refined_context ? "refined" : "original";
    j["dataset"] = {{"path", dataset_path.string()}, {"format", to_string(format)}};
    j["out_dir"] = out_dir.string();
    j["prompt_dir"] = prompt_dir.string();
    j["strict"] = strict;
    j["token_counter"] = token_counter;
    return j;
}

std::string RunConfig::digest() const
{
    auto j = to_json();
    j.erase("concurrency");
    j.erase("out_dir");
    j["backend"].erase("timeout_seconds");
    j["backend"].erase("retry");
    return fnv1a_hex(j.dump());
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [key, value] : obj.items()) {
        if (key == "api_key" || key == "token" || key == "secret" || key == "password") {
            throw ValidationError("config: " + where + "'" + key +
                                  "' is not accepted; name an environment variable via auth_env");
        }
        if (!allowed.contains(key)) {
            throw ValidationError("config: unknown key '" + where + key + "'");
        }
    }
}

fs::path resolve(const fs::path& p, const fs::path& base_dir)
{
    if (p.empty() || p.is_absolute() || base_dir.empty()) {
        return p;
    }
    return base_dir / p;
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: '" + where + key + "' has the wrong type");
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, RunConfig c, const fs::path& base_dir)
{
    if (!j.is_object()) {
        throw ValidationError("config: top level must be an object");
    }
    reject_unknown(j,
                   {"max_rounds", "max_tokens", "temperature", "top_p", "history_window",
                    "concurrency", "backend", "stages", "multi_turn_context", "dataset", "out_dir",
                    "prompt_dir", "strict", "token_counter"},
                   "");

    if (j.contains("max_rounds")) c.max_rounds = get_as<int>(j, "max_rounds", "");
    if (j.contains("max_tokens")) c.max_tokens = get_as<int>(j, "max_tokens", "");
    if (j.contains("temperature")) c.temperature = get_as<double>(j, "temperature", "");
    if (j.contains("top_p")) c.top_p = get_as<double>(j, "top_p", "");
    if (j.contains("history_window")) c.history_window = get_as<int>(j, "history_window", "");
    if (j.contains("concurrency")) c.concurrency = get_as<int>(j, "concurrency", "");
    if (j.contains("strict")) c.strict = get_as<bool>(j, "strict", "");
    if (j.contains("token_counter")) c.token_counter = get_as<std::string>(j, "token_counter", "");
    if (j.contains("out_dir")) c.out_dir = resolve(get_as<std::string>(j, "out_dir", ""), base_dir);
    if (j.contains("prompt_dir")) {
        c.prompt_dir = resolve(get_as<std::string>(j, "prompt_dir", ""), base_dir);
    }
    if (j.contains("multi_turn_context")) {
        const auto mode = get_as<std::string>(j, "multi_turn_context", "");
        if (mode != "refined" && mode != "original") {
            throw ValidationError("config: multi_turn_context must be 'refined' or 'original'");
        }
        c.refined_context = mode == "refined";
    }

    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        if (!b.is_object()) throw ValidationError("config: 'backend' must be an object");
        reject_unknown(b,
                       {"kind", "endpoint", "model", "auth_env", "supports_system_prompt",
                        "timeout_seconds", "retry", "mock_script"},
                       "backend.");
        if (b.contains("kind")) c.backend.kind = backend_kind_from_string(get_as<std::string>(b, "kind", "backend."));
        if (b.contains("endpoint")) c.backend.endpoint = get_as<std::string>(b, "endpoint", "backend.");
        if (b.contains("model")) c.backend.model = get_as<std::string>(b, "model", "backend.");
        if (b.contains("auth_env")) c.backend.auth_env = get_as<std::string>(b, "auth_env", "backend.");
        if (b.contains("supports_system_prompt")) {
            c.backend.supports_system_prompt = get_as<bool>(b, "supports_system_prompt", "backend.");
        }
        if (b.contains("timeout_seconds")) {
            c.backend.timeout = std::chrono::seconds(get_as<int>(b, "timeout_seconds", "backend."));
        }
        if (b.contains("mock_script")) {
            c.backend.mock_script = resolve(get_as<std::string>(b, "mock_script", "backend."), base_dir);
        }
        if (b.contains("retry")) {
            const auto& r = b.at("retry");
            if (!r.is_object()) throw ValidationError("config: 'backend.retry' must be an object");
            reject_unknown(r, {"max_attempts", "initial_backoff_ms", "multiplier", "max_backoff_ms"},
                           "backend.retry.");
            auto& p = c.backend.retry;
            if (r.contains("max_attempts")) p.max_attempts = get_as<int>(r, "max_attempts", "backend.retry.");
            if (r.contains("initial_backoff_ms")) {
                p.initial_backoff = std::chrono::milliseconds(get_as<int>(r, "initial_backoff_ms", "backend.retry."));
            }
            if (r.contains("multiplier")) p.multiplier = get_as<double>(r, "multiplier", "backend.retry.");
            if (r.contains("max_backoff_ms")) {
                p.max_backoff = std::chrono::milliseconds(get_as<int>(r, "max_backoff_ms", "backend.retry."));
            }
        }
    }

    if (j.contains("stages")) {
        const auto& s = j.at("stages");
        if (!s.is_object()) throw ValidationError("config: 'stages' must be an object");
        reject_unknown(s, {"debate", "advise", "judge", "advisor_sees_response"}, "stages.");
        if (s.contains("debate")) c.stages.debate = get_as<bool>(s, "debate", "stages.");
        if (s.contains("advise")) c.stages.advise = get_as<bool>(s, "advise", "stages.");
        if (s.contains("judge")) c.stages.judge = get_as<bool>(s, "judge", "stages.");
        if (s.contains("advisor_sees_response")) {
            c.stages.advisor_sees_response = get_as<bool>(s, "advisor_sees_response", "stages.");
        }
    }

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (!d.is_object()) throw ValidationError("config: 'dataset' must be an object");
        reject_unknown(d, {"path", "format"}, "dataset.");
        if (d.contains("path")) c.dataset_path = resolve(get_as<std::string>(d, "path", "dataset."), base_dir);
        if (d.contains("format")) c.format = dataset_format_from_string(get_as<std::string>(d, "format", "dataset."));
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("config: cannot open " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, RunConfig{}, path.parent_path());
}

}  // namespace coevol
