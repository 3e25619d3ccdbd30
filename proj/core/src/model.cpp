#include "coevol/model.hpp"

#include <numeric>

namespace coevol {

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

void IftSample::validate() const
{
    if (id.empty()) {
        throw ValidationError("sample has an empty id");
    }
    if (turns.empty()) {
        if (response.empty()) {
            throw ValidationError("single-turn sample '" + id + "' has an empty response");
        }
        return;
    }
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const auto& t = turns[i];
        if (t.turn_index != static_cast<int>(i)) {
            throw ValidationError("sample '" + id + "': turn indices are not contiguous from 0");
        }
        if (t.user.empty() || t.assistant.empty()) {
            throw ValidationError("sample '" + id + "': turn " + std::to_string(i) +
                                  " has empty user or assistant text");
        }
    }
}

AdvisorOutput AdvisorOutput::parse(std::string raw)
{
    AdvisorOutput out;
    std::string_view rest = raw;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        const auto line = trim(rest.substr(0, nl));
        if (!line.empty()) {
            out.suggestions.emplace_back(line);
        }
        if (nl == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(nl + 1);
    }
    out.raw = std::move(raw);
    return out;
}

std::string AdvisorOutput::joined() const
{
    std::string out;
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
        if (i != 0) {
            out += '\n';
        }
        out += suggestions[i];
    }
    return out;
}

Outcome resolve(Choice choice, Order order)
{
    switch (choice) {
    case Choice::First:
        return order == Order::OriginalFirst ? Outcome::OriginalWins : Outcome::EditedWins;
    case Choice::Second:
        return order == Order::OriginalFirst ? Outcome::EditedWins : Outcome::OriginalWins;
    case Choice::Equal:
    case Choice::Unparseable:
        break;
    }
    return Outcome::Tie;
}

ScorePair score_pair(const JudgeVerdict& v1, const JudgeVerdict& v2)
{
    if (v1.order == v2.order) {
        throw ProtocolError("judge verdicts must come from opposite presentation orders");
    }
    ScorePair s;
    for (const auto* v : {&v1, &v2}) {
        switch (resolve(*v)) {
        case Outcome::OriginalWins:
            s.original += 1;
            break;
        case Outcome::EditedWins:
            s.edited += 1;
            break;
        case Outcome::Tie:
            s.original += 1;
            s.edited += 1;
            break;
        }
    }
    return s;
}

Decision decide(const ScorePair& scores)
{
    return scores.edited > scores.original ? Decision::Continue : Decision::Stop;
}

int EvolutionTrace::agent_calls() const
{
    return std::accumulate(iterations.begin(), iterations.end(), 0,
                           [](int acc, const IterationRecord& r) { return acc + r.agent_calls; });
}

std::string_view to_string(Choice c)
{
    switch (c) {
    case Choice::First: return "first";
    case Choice::Second: return "second";
    case Choice::Equal: return "equal";
    case Choice::Unparseable: return "unparseable";
    }
    return "unparseable";
}

std::string_view to_string(Order o)
{
    return o == Order::OriginalFirst ? "original_first" : "edited_first";
}

std::string_view to_string(Outcome o)
{
    switch (o) {
    case Outcome::OriginalWins: return "original";
    case Outcome::EditedWins: return "edited";
    case Outcome::Tie: return "tie";
    }
    return "tie";
}

std::string_view to_string(Decision d)
{
    return d == Decision::Continue ? "continue" : "stop";
}

std::string_view to_string(TraceStatus s)
{
    switch (s) {
    case TraceStatus::Ok: return "ok";
    case TraceStatus::Failed: return "failed";
    case TraceStatus::Partial: return "partial";
    }
    return "failed";
}

Choice choice_from_string(std::string_view s)
{
    if (s == "first") return Choice::First;
    if (s == "second") return Choice::Second;
    if (s == "equal") return Choice::Equal;
    if (s == "unparseable") return Choice::Unparseable;
    throw ValidationError("unknown verdict choice: " + std::string(s));
}

Order order_from_string(std::string_view s)
{
    if (s == "original_first") return Order::OriginalFirst;
    if (s == "edited_first") return Order::EditedFirst;
    throw ValidationError("unknown verdict order: " + std::string(s));
}

Decision decision_from_string(std::string_view s)
{
    if (s == "continue") return Decision::Continue;
    if (s == "stop") return Decision::Stop;
    throw ValidationError("unknown decision: " + std::string(s));
}

TraceStatus status_from_string(std::string_view s)
{
    if (s == "ok") return TraceStatus::Ok;
    if (s == "failed") return TraceStatus::Failed;
    if (s == "partial") return TraceStatus::Partial;
    throw ValidationError("unknown trace status: " + std::string(s));
}

}  // namespace coevol
