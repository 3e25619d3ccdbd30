#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coevol/model.hpp"

namespace coevol {

class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    [[nodiscard]] virtual std::size_t count(std::string_view text) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Maximal runs of non-whitespace characters.
class WhitespaceTokenCounter : public TokenCounter {
public:
    [[nodiscard]] std::size_t count(std::string_view text) const override;
    [[nodiscard]] std::string name() const override { return "whitespace"; }
};

/// UTF-8 code points.
class Utf8CharCounter : public TokenCounter {
public:
    [[nodiscard]] std::size_t count(std::string_view text) const override;
    [[nodiscard]] std::string name() const override { return "utf8-chars"; }
};

std::unique_ptr<TokenCounter> make_token_counter(const std::string& name);

/// Run statistics: how many evolution rounds each response went through
/// and how response length moved.
///
/// Round proportions cover responses of samples that evolved cleanly;
/// failed samples are counted apart. Length means cover every response,
/// with failed samples contributing their unchanged originals.
struct RunReport {
    std::string token_counter;
    std::size_t samples = 0;
    std::size_t samples_failed = 0;
    std::size_t responses = 0;
    std::size_t responses_evolved = 0;
    /// rounds_evolved -> responses, for 0..max round seen.
    std::map<int, std::size_t> rounds_histogram;
    std::map<int, double> proportions;
    /// Fraction with at least k rounds.
    std::map<int, double> cumulative;
    double mean_tokens_before = 0.0;
    double mean_tokens_after = 0.0;
    long long agent_calls = 0;
    long long parse_retries = 0;
    double wall_seconds = 0.0;

    /// Field-wise equality, ignoring wall time.
    [[nodiscard]] bool same_statistics(const RunReport& other) const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    [[nodiscard]] std::string to_text() const;
};

RunReport build_report(const std::vector<SampleOutcome>& outcomes, const TokenCounter& counter);

}  // namespace coevol
