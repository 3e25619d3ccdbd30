#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coevol/config.hpp"
#include "coevol/debate.hpp"
#include "coevol/gateway.hpp"
#include "coevol/model.hpp"
#include "coevol/prompt_forge.hpp"

namespace coevol {

/// Reads the judge's choice from the first non-blank line of its reply:
/// "assistant 1", "assistant 2" or "equal", case-insensitive, angle
/// brackets optional. The earliest match on that line wins.
std::optional<Choice> parse_verdict(std::string_view reply);

/// Trims the editor reply and drops one leading "### Response:" header.
std::string clean_edit(std::string_view reply);

struct RenderedPrompt {
    Role role;
    Stage stage;
    std::string system;
    std::string user;
};

/// Runs the debate, advise, edit, judge loop for samples. Each round uses
/// fresh agents, so nothing but the accepted response crosses rounds.
/// One Evolver may serve many workers at once.
class Evolver {
public:
    Evolver(Gateway& gateway, const PromptCatalog& catalog, RunConfig config);

    AdvisorOutput advise(const std::optional<DebateTranscript>& debate, const StructuredSample& sample,
                         const CallScope& scope, std::vector<std::string>* warnings = nullptr);

    /// Without suggestions the editor answers the request directly.
    std::string edit(const std::optional<AdvisorOutput>& suggestions, const StructuredSample& sample,
                     const std::string& previous_response, const CallScope& scope);

    /// Two fresh-session judgments with the responses swapped. An
    /// unreadable verdict is asked once more, then recorded Unparseable.
    std::pair<JudgeVerdict, JudgeVerdict> judge(const std::string& request, const std::string& original,
                                                const std::string& edited, const CallScope& scope);

    /// Evolves a single-turn sample.
    EvolutionTrace evolve(const IftSample& sample);

    /// Refines the assistant turns of a conversation one after another.
    SampleOutcome evolve_multi_turn(const IftSample& sample);

    /// Dispatches on the sample shape; never throws for agent failures.
    SampleOutcome run(const IftSample& sample);

    /// Every prompt the first round would send for `sample`, with agent
    /// outputs replaced by stand-ins. Makes no calls.
    [[nodiscard]] std::vector<RenderedPrompt> preview(const IftSample& sample) const;

    [[nodiscard]] const RunConfig& config() const { return config_; }

    static constexpr int kMaxSuggestions = 3;

private:
    EvolutionTrace evolve_target(IftSample sample, std::optional<int> turn);
    std::string ask_fresh(Role role, Stage stage, const std::string& prompt, const CallScope& scope);

    Gateway& gateway_;
    const PromptCatalog& catalog_;
    RunConfig config_;
    DebateEngine debate_;
};

}  // namespace coevol
