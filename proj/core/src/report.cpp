#include "coevol/report.hpp"

#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace coevol {

std::size_t WhitespaceTokenCounter::count(std::string_view text) const
{
    std::size_t n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

std::size_t Utf8CharCounter::count(std::string_view text) const
{
    std::size_t n = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::unique_ptr<TokenCounter> make_token_counter(const std::string& name)
{
    if (name == "whitespace") return std::make_unique<WhitespaceTokenCounter>();
    if (name == "utf8-chars") return std::make_unique<Utf8CharCounter>();
    throw ValidationError("unknown token counter '" + name + "'");
}

RunReport build_report(const std::vector<SampleOutcome>& outcomes, const TokenCounter& counter)
{
    RunReport r;
    r.token_counter = counter.name();
    r.samples = outcomes.size();
    double before = 0.0;
    double after = 0.0;
    int max_round = 0;
    for (const auto& o : outcomes) {
        if (o.failed()) ++r.samples_failed;
        for (const auto& t : o.traces) {
            ++r.responses;
            r.agent_calls += t.agent_calls();
            for (const auto& it : t.iterations) r.parse_retries += it.parse_retries;
            before += static_cast<double>(counter.count(t.original_response));
            if (o.failed()) {
                after += static_cast<double>(counter.count(t.original_response));
                continue;
            }
            after += static_cast<double>(counter.count(t.final_response));
            ++r.responses_evolved;
            ++r.rounds_histogram[t.rounds_evolved];
            max_round = std::max(max_round, t.rounds_evolved);
        }
    }
    if (r.responses > 0) {
        r.mean_tokens_before = before / static_cast<double>(r.responses);
        r.mean_tokens_after = after / static_cast<double>(r.responses);
    }
    if (r.responses_evolved > 0) {
        for (int k = 0; k <= max_round; ++k) {
            r.rounds_histogram.try_emplace(k, 0);
        }
        const auto total = static_cast<double>(r.responses_evolved);
        std::size_t at_least = r.responses_evolved;
        for (const auto& [k, n] : r.rounds_histogram) {
            r.proportions[k] = static_cast<double>(n) / total;
            r.cumulative[k] = static_cast<double>(at_least) / total;
            at_least -= n;
        }
    }
    return r;
}

bool RunReport::same_statistics(const RunReport& o) const
{
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); };
    auto close_map = [&](const std::map<int, double>& a, const std::map<int, double>& b) {
        if (a.size() != b.size()) return false;
        for (const auto& [k, v] : a) {
            const auto it = b.find(k);
            if (it == b.end() || !close(v, it->second)) return false;
        }
        return true;
    };
    return token_counter == o.token_counter && samples == o.samples && samples_failed == o.samples_failed &&
           responses == o.responses && responses_evolved == o.responses_evolved &&
           rounds_histogram == o.rounds_histogram && close_map(proportions, o.proportions) &&
           close_map(cumulative, o.cumulative) && close(mean_tokens_before, o.mean_tokens_before) &&
           close(mean_tokens_after, o.mean_tokens_after) && agent_calls == o.agent_calls &&
           parse_retries == o.parse_retries;
}

nlohmann::ordered_json RunReport::to_json() const
{
    nlohmann::ordered_json j;
    j["token_counter"] = token_counter;
    j["samples"] = samples;
    j["samples_failed"] = samples_failed;
    j["responses"] = responses;
    j["responses_evolved"] = responses_evolved;
    auto hist = nlohmann::ordered_json::object();
    auto prop = nlohmann::ordered_json::object();
    auto cum = nlohmann::ordered_json::object();
    for (const auto& [k, n] : rounds_histogram) hist[std::to_string(k)] = n;
    for (const auto& [k, p] : proportions) prop[std::to_string(k)] = p;
    for (const auto& [k, p] : cumulative) cum[std::to_string(k)] = p;
    j["rounds_histogram"] = hist;
    j["proportions"] = prop;
    j["cumulative"] = cum;
    j["mean_tokens_before"] = mean_tokens_before;
    j["mean_tokens_after"] = mean_tokens_after;
    j["agent_calls"] = agent_calls;
    j["parse_retries"] = parse_retries;
    j["wall_seconds"] = wall_seconds;
    return j;
}

std::string RunReport::to_text() const
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "samples:            " << samples << " (" << samples_failed << " failed)\n";
    os << "responses:          " << responses << " (" << responses_evolved << " evolved cleanly)\n";
    os << "rounds evolved:\n";
    for (const auto& [k, n] : rounds_histogram) {
        os << "  " << k << ": " << n << "  proportion " << proportions.at(k) << "  at-least " << cumulative.at(k)
           << '\n';
    }
    os << "mean tokens before: " << mean_tokens_before << " [" << token_counter << "]\n";
    os << "mean tokens after:  " << mean_tokens_after << " [" << token_counter << "]\n";
    os << "agent calls:        " << agent_calls << " (+" << parse_retries << " verdict retries)\n";
    if (wall_seconds > 0.0) {
        os << "wall time:          " << std::setprecision(2) << wall_seconds << " s\n";
    }
    return os.str();
}

}  // namespace coevol
