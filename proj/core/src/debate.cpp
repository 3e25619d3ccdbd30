#include "coevol/debate.hpp"

#include <exception>
#include <future>

namespace coevol {

namespace {

/// Runs one debater turn; backend failures gain the debater identity.
Gateway::AskResult speak(Gateway& gateway, const ChatSession& session, const std::string& prompt, CallTag tag)
{
    const auto role = tag.role;
    const auto stage = tag.stage;
    Gateway::AskResult result{"", session, 0};
    try {
        result = gateway.ask(session, prompt, std::move(tag));
    } catch (const BackendError& e) {
        throw AgentCallError(role, stage, e.what());
    }
    if (trim(result.reply).empty()) {
        throw AgentCallError(role, stage, "empty debate argument");
    }
    return result;
}

/// Issues both turns concurrently and waits for both before returning.
std::pair<Gateway::AskResult, Gateway::AskResult> speak_together(Gateway& gateway, const ChatSession& pos,
                                                                 const std::string& pos_prompt,
                                                                 const ChatSession& crt,
                                                                 const std::string& crt_prompt,
                                                                 const CallScope& scope, Stage stage)
{
    auto pos_future = std::async(std::launch::async, [&] {
        return speak(gateway, pos, pos_prompt, scope.tag(Role::Positive, stage));
    });
    std::exception_ptr crt_error;
    std::optional<Gateway::AskResult> crt_result;
    try {
        crt_result = speak(gateway, crt, crt_prompt, scope.tag(Role::Critical, stage));
    } catch (...) {
        crt_error = std::current_exception();
    }
    auto pos_result = pos_future.get();
    if (crt_error) {
        std::rethrow_exception(crt_error);
    }
    return {std::move(pos_result), std::move(*crt_result)};
}

}  // namespace

DebaterPair DebaterPair::fresh(const PromptCatalog& catalog, bool supports_system_prompt)
{
    return {ChatSession(catalog.role_play(Role::Positive), supports_system_prompt),
            ChatSession(catalog.role_play(Role::Critical), supports_system_prompt)};
}

DebateEngine::DebateEngine(Gateway& gateway, const PromptCatalog& catalog, bool supports_system_prompt)
    : gateway_(gateway), catalog_(catalog), supports_system_prompt_(supports_system_prompt)
{
}

DebateEngine::Arguments DebateEngine::round_predetermined(DebaterPair& pair, const StructuredSample& sample,
                                                          const CallScope& scope)
{
    const Bindings b{{"sample", sample.text}};
    const auto pos_prompt = catalog_.render_task(Role::Positive, Stage::Round1, b);
    const auto crt_prompt = catalog_.render_task(Role::Critical, Stage::Round1, b);
    auto [pos, crt] = speak_together(gateway_, pair.positive, pos_prompt, pair.critical, crt_prompt, scope,
                                     Stage::Round1);
    pair.positive = std::move(pos.session);
    pair.critical = std::move(crt.session);
    return {std::move(pos.reply), std::move(crt.reply)};
}

DebateEngine::Arguments DebateEngine::round_free(DebaterPair& pair, const std::string& pos_pred,
                                                 const std::string& crt_pred, const CallScope& scope)
{
    // Cross-wired: each side reviews the opponent's opening argument.
    const auto pos_prompt = catalog_.render_task(Role::Positive, Stage::Round2, {{"crt_pred", crt_pred}});
    const auto crt_prompt = catalog_.render_task(Role::Critical, Stage::Round2, {{"pos_pred", pos_pred}});
    auto [pos, crt] = speak_together(gateway_, pair.positive, pos_prompt, pair.critical, crt_prompt, scope,
                                     Stage::Round2);
    pair.positive = std::move(pos.session);
    pair.critical = std::move(crt.session);
    return {std::move(pos.reply), std::move(crt.reply)};
}

DebateTranscript DebateEngine::run_debate(const StructuredSample& sample, const CallScope& scope)
{
    auto pair = DebaterPair::fresh(catalog_, supports_system_prompt_);
    auto opening = round_predetermined(pair, sample, scope);
    auto rebuttal = round_free(pair, opening.positive, opening.critical, scope);
    return {std::move(opening.positive), std::move(opening.critical), std::move(rebuttal.positive),
            std::move(rebuttal.critical)};
}

}  // namespace coevol
