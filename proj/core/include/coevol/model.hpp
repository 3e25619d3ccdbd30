#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coevol {

/// Raised when caller-supplied data breaks a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a caller violates an interaction contract (e.g. two judge
/// verdicts presented in the same order).
class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct ConversationTurn {
    std::string user;
    std::string assistant;
    int turn_index = 0;

    bool operator==(const ConversationTurn&) const = default;
};

/// One instruction-tuning record. Single-turn samples carry `response`;
/// multi-turn samples carry their assistant texts inside `turns`.
struct IftSample {
    std::string id;
    std::string instruction;
    std::optional<std::string> input;
    std::vector<ConversationTurn> turns;
    std::string response;

    [[nodiscard]] bool is_multi_turn() const { return !turns.empty(); }
    /// Empty-string input counts as no input.
    [[nodiscard]] bool has_input() const { return input.has_value() && !input->empty(); }

    void validate() const;

    bool operator==(const IftSample&) const = default;
};

struct DebateTranscript {
    std::string pos_pred;
    std::string crt_pred;
    std::string pos_free;
    std::string crt_free;

    [[nodiscard]] bool complete() const
    {
        return !pos_pred.empty() && !crt_pred.empty() && !pos_free.empty() && !crt_free.empty();
    }

    bool operator==(const DebateTranscript&) const = default;
};

struct AdvisorOutput {
    std::string raw;
    std::vector<std::string> suggestions;

    /// Newline split, trimmed, blank lines dropped. Over-long lists are kept.
    static AdvisorOutput parse(std::string raw);

    /// Suggestions re-joined for the editor prompt.
    [[nodiscard]] std::string joined() const;

    bool operator==(const AdvisorOutput&) const = default;
};

enum class Choice { First, Second, Equal, Unparseable };
enum class Order { OriginalFirst, EditedFirst };
enum class Outcome { OriginalWins, EditedWins, Tie };
enum class Decision { Continue, Stop };

struct JudgeVerdict {
    std::string raw;
    Choice choice = Choice::Unparseable;
    Order order = Order::OriginalFirst;
    int attempts = 1;

    bool operator==(const JudgeVerdict&) const = default;
};

/// Maps a verdict's positional choice back onto original/edited.
/// Unparseable verdicts resolve to a tie.
[[nodiscard]] Outcome resolve(Choice choice, Order order);
[[nodiscard]] inline Outcome resolve(const JudgeVerdict& v) { return resolve(v.choice, v.order); }

struct ScorePair {
    int original = 0;
    int edited = 0;

    bool operator==(const ScorePair&) const = default;
};

/// Sums the per-comparison indicator over both order-swapped verdicts:
/// the winner of a comparison scores 1, a tie scores 1 for both.
/// Throws ProtocolError when both verdicts share a presentation order.
[[nodiscard]] ScorePair score_pair(const JudgeVerdict& v1, const JudgeVerdict& v2);

/// Continue iff the edited response strictly out-scores the original.
[[nodiscard]] Decision decide(const ScorePair& scores);

struct IterationRecord {
    int round = 1;
    std::optional<DebateTranscript> debate;
    std::optional<AdvisorOutput> advisor;
    std::string edited_response;
    std::optional<std::pair<JudgeVerdict, JudgeVerdict>> verdicts;
    std::optional<ScorePair> scores;
    Decision decision = Decision::Stop;
    int agent_calls = 0;
    int parse_retries = 0;
    std::vector<std::string> warnings;

    bool operator==(const IterationRecord&) const = default;
};

enum class TraceStatus { Ok, Failed, Partial };

/// Evolution history of one response (a single-turn sample, or one assistant
/// turn of a conversation).
struct EvolutionTrace {
    std::string sample_id;
    std::optional<int> turn_index;
    std::string original_response;
    std::vector<IterationRecord> iterations;
    std::string final_response;
    int rounds_evolved = 0;
    TraceStatus status = TraceStatus::Ok;
    std::string error;

    [[nodiscard]] int agent_calls() const;

    bool operator==(const EvolutionTrace&) const = default;
};

/// Everything produced for one dataset sample.
struct SampleOutcome {
    std::string sample_id;
    bool multi_turn = false;
    std::vector<EvolutionTrace> traces;
    TraceStatus status = TraceStatus::Ok;
    std::string error;

    [[nodiscard]] bool failed() const { return status != TraceStatus::Ok; }

    bool operator==(const SampleOutcome&) const = default;
};

std::string_view to_string(Choice c);
std::string_view to_string(Order o);
std::string_view to_string(Outcome o);
std::string_view to_string(Decision d);
std::string_view to_string(TraceStatus s);

Choice choice_from_string(std::string_view s);
Order order_from_string(std::string_view s);
Decision decision_from_string(std::string_view s);
TraceStatus status_from_string(std::string_view s);

/// Whitespace trim used across parsers.
std::string_view trim(std::string_view s);

}  // namespace coevol
