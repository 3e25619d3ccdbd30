#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "coevol/gateway.hpp"
#include "coevol/model.hpp"
#include "coevol/prompt_forge.hpp"

namespace coevol {

/// An agent call that failed for good; carries the agent identity.
class AgentCallError : public std::runtime_error {
public:
    AgentCallError(Role role, Stage stage, const std::string& what)
        : std::runtime_error(std::string(to_string(role)) + "/" + std::string(to_string(stage)) + ": " + what),
          role_(role),
          stage_(stage)
    {
    }

    [[nodiscard]] Role role() const { return role_; }
    [[nodiscard]] Stage stage() const { return stage_; }

private:
    Role role_;
    Stage stage_;
};

/// Which sample, conversation turn and evolution round a call belongs to.
struct CallScope {
    std::string sample_id;
    std::optional<int> turn;
    int round = 1;

    [[nodiscard]] CallTag tag(Role role, Stage stage) const { return {role, stage, round, sample_id, turn}; }
};

struct DebaterPair {
    ChatSession positive;
    ChatSession critical;

    static DebaterPair fresh(const PromptCatalog& catalog, bool supports_system_prompt);
};

/// Two-stage debate: predetermined positions, then free cross-evaluation.
/// Both debaters speak concurrently within a stage; the second stage starts
/// only once both first-stage replies are in.
class DebateEngine {
public:
    DebateEngine(Gateway& gateway, const PromptCatalog& catalog, bool supports_system_prompt);

    struct Arguments {
        std::string positive;
        std::string critical;
    };

    /// Positive debater argues for the response, critical debater against it.
    /// Both sessions keep their exchange.
    Arguments round_predetermined(DebaterPair& pair, const StructuredSample& sample, const CallScope& scope);

    /// Each debater evaluates the opponent's first-stage argument. The
    /// structured sample reaches the debaters through their kept memory.
    Arguments round_free(DebaterPair& pair, const std::string& pos_pred, const std::string& crt_pred,
                         const CallScope& scope);

    /// Fresh debaters, both stages; exactly four agent calls.
    DebateTranscript run_debate(const StructuredSample& sample, const CallScope& scope);

    static constexpr int kCallsPerDebate = 4;

private:
    Gateway& gateway_;
    const PromptCatalog& catalog_;
    bool supports_system_prompt_;
};

}  // namespace coevol
