#include "coevol/evolution.hpp"

#include <algorithm>
#include <cctype>
#include <exception>

namespace coevol {

namespace {

constexpr std::string_view kResponseHeader = "### Response:";

std::string lowercase(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Earliest position of `needle` in `hay` not followed by another digit.
std::size_t find_token(const std::string& hay, std::string_view needle)
{
    auto pos = hay.find(needle);
    while (pos != std::string::npos) {
        const auto after = pos + needle.size();
        if (after >= hay.size() || !std::isdigit(static_cast<unsigned char>(hay[after]))) {
            return pos;
        }
        pos = hay.find(needle, pos + 1);
    }
    return std::string::npos;
}

std::string& response_of(IftSample& sample, std::optional<int> turn)
{
    return turn ? sample.turns[static_cast<std::size_t>(*turn)].assistant : sample.response;
}

}  // namespace

std::optional<Choice> parse_verdict(std::string_view reply)
{
    std::string_view line;
    std::string_view rest = reply;
    while (!rest.empty()) {
        const auto nl = rest.find('\n');
        line = trim(rest.substr(0, nl));
        if (!line.empty()) break;
        if (nl == std::string_view::npos) break;
        rest.remove_prefix(nl + 1);
    }
    if (line.empty()) {
        return std::nullopt;
    }
    const auto lower = lowercase(line);
    const std::pair<std::string_view, Choice> candidates[] = {
        {"assistant 1", Choice::First},
        {"assistant 2", Choice::Second},
        {"equal", Choice::Equal},
    };
    std::optional<Choice> best;
    auto best_pos = std::string::npos;
    for (const auto& [needle, choice] : candidates) {
        const auto pos = find_token(lower, needle);
        if (pos < best_pos) {
            best_pos = pos;
            best = choice;
        }
    }
    return best;
}

std::string clean_edit(std::string_view reply)
{
    auto text = trim(reply);
    if (text.starts_with(kResponseHeader)) {
        text.remove_prefix(kResponseHeader.size());
        text = trim(text);
    }
    return std::string(text);
}

Evolver::Evolver(Gateway& gateway, const PromptCatalog& catalog, RunConfig config)
    : gateway_(gateway),
      catalog_(catalog),
      config_(std::move(config)),
      debate_(gateway, catalog, config_.backend.supports_system_prompt)
{
}

std::string Evolver::ask_fresh(Role role, Stage stage, const std::string& prompt, const CallScope& scope)
{
    const ChatSession session(catalog_.role_play(role), config_.backend.supports_system_prompt);
    try {
        return gateway_.ask(session, prompt, scope.tag(role, stage)).reply;
    } catch (const BackendError& e) {
        throw AgentCallError(role, stage, e.what());
    }
}

AdvisorOutput Evolver::advise(const std::optional<DebateTranscript>& debate, const StructuredSample& sample,
                              const CallScope& scope, std::vector<std::string>* warnings)
{
    const auto& shown = config_.stages.advisor_sees_response ? sample.text : sample.request_only_text;
    const auto stage = debate ? Stage::Advise : Stage::AdviseSolo;
    Bindings b{{"sample", shown}};
    if (debate) {
        b.emplace("pos_pred", debate->pos_pred);
        b.emplace("crt_pred", debate->crt_pred);
        b.emplace("pos_free", debate->pos_free);
        b.emplace("crt_free", debate->crt_free);
    }
    auto out = AdvisorOutput::parse(ask_fresh(Role::Advisor, stage, catalog_.render_task(Role::Advisor, stage, b), scope));
    if (out.suggestions.empty()) {
        throw AgentCallError(Role::Advisor, stage, "advisor returned no suggestions");
    }
    if (out.suggestions.size() > kMaxSuggestions && warnings != nullptr) {
        warnings->push_back("advisor returned " + std::to_string(out.suggestions.size()) +
                            " suggestions (asked for at most 3)");
    }
    return out;
}

std::string Evolver::edit(const std::optional<AdvisorOutput>& suggestions, const StructuredSample& sample,
                          const std::string& previous_response, const CallScope& scope)
{
    std::string prompt;
    Stage stage = Stage::EditSolo;
    if (suggestions) {
        stage = Stage::Edit;
        prompt = catalog_.render_task(Role::Editor, stage,
                                      {{"adv_sugg", suggestions->joined()},
                                       {"pre_resp", previous_response},
                                       {"sample", sample.request_only_text},
                                       {"sample_request", sample.request_only_text}});
    } else {
        prompt = catalog_.render_task(Role::Editor, stage, {{"sample_request", sample.request_only_text}});
    }
    return clean_edit(ask_fresh(Role::Editor, stage, prompt, scope));
}

std::pair<JudgeVerdict, JudgeVerdict> Evolver::judge(const std::string& request, const std::string& original,
                                                     const std::string& edited, const CallScope& scope)
{
    const auto [forward, reverse] = catalog_.render_judge_pair(request, original, edited);
    auto one = [&](const std::string& prompt, Stage stage, Order order) {
        JudgeVerdict v;
        v.order = order;
        v.raw = ask_fresh(Role::Judge, stage, prompt, scope);
        auto choice = parse_verdict(v.raw);
        if (!choice) {
            v.attempts = 2;
            v.raw = ask_fresh(Role::Judge, stage, prompt, scope);
            choice = parse_verdict(v.raw);
        }
        v.choice = choice.value_or(Choice::Unparseable);
        return v;
    };
    auto first = one(forward, Stage::JudgeForward, Order::OriginalFirst);
    auto second = one(reverse, Stage::JudgeReverse, Order::EditedFirst);
    return {std::move(first), std::move(second)};
}

EvolutionTrace Evolver::evolve_target(IftSample sample, std::optional<int> turn)
{
    EvolutionTrace trace;
    trace.sample_id = sample.id;
    trace.turn_index = turn;
    trace.original_response = response_of(sample, turn);

    const int rounds = config_.stages.judge ? config_.max_rounds : 1;
    try {
        for (int k = 1; k <= rounds; ++k) {
            const CallScope scope{sample.id, turn, k};
            const auto structured = render_sample(sample, config_.history_window, turn);
            const auto& current = response_of(sample, turn);

            IterationRecord rec;
            rec.round = k;
            if (config_.stages.debate) {
                rec.debate = debate_.run_debate(structured, scope);
                rec.agent_calls += DebateEngine::kCallsPerDebate;
            }
            if (config_.stages.advise) {
                rec.advisor = advise(rec.debate, structured, scope, &rec.warnings);
                rec.agent_calls += 1;
            }
            rec.edited_response = edit(rec.advisor, structured, current, scope);
            rec.agent_calls += 1;

            if (rec.edited_response.empty()) {
                rec.decision = Decision::Stop;
                rec.warnings.push_back("editor returned an empty response");
            } else if (config_.stages.judge) {
                rec.verdicts = judge(structured.request_only_text, current, rec.edited_response, scope);
                rec.agent_calls += 2;
                rec.parse_retries = (rec.verdicts->first.attempts - 1) + (rec.verdicts->second.attempts - 1);
                rec.scores = score_pair(rec.verdicts->first, rec.verdicts->second);
                rec.decision = decide(*rec.scores);
            } else {
                rec.decision = Decision::Continue;
            }

            const bool accepted = rec.decision == Decision::Continue;
            if (accepted) {
                response_of(sample, turn) = rec.edited_response;
                ++trace.rounds_evolved;
            }
            trace.iterations.push_back(std::move(rec));
            if (!accepted) {
                break;
            }
        }
    } catch (const std::exception& e) {
        trace.status = TraceStatus::Failed;
        trace.error = e.what();
    }
    trace.final_response = response_of(sample, turn);
    return trace;
}

EvolutionTrace Evolver::evolve(const IftSample& sample)
{
    if (sample.is_multi_turn()) {
        throw ValidationError("sample '" + sample.id + "' is multi-turn; use evolve_multi_turn");
    }
    return evolve_target(sample, std::nullopt);
}

SampleOutcome Evolver::evolve_multi_turn(const IftSample& sample)
{
    if (!sample.is_multi_turn()) {
        throw ValidationError("sample '" + sample.id + "' has no conversation turns");
    }
    SampleOutcome outcome;
    outcome.sample_id = sample.id;
    outcome.multi_turn = true;

    IftSample refined = sample;
    for (int t = 0; t < static_cast<int>(sample.turns.size()); ++t) {
        // History comes from refined or original earlier turns; the target
        // turn always starts from its original assistant text.
        IftSample context = config_.refined_context ? refined : sample;
        auto trace = evolve_target(std::move(context), t);
        refined.turns[static_cast<std::size_t>(t)].assistant = trace.final_response;
        const bool failed = trace.status != TraceStatus::Ok;
        if (failed) {
            outcome.status = t == 0 ? TraceStatus::Failed : TraceStatus::Partial;
            outcome.error = "turn " + std::to_string(t) + ": " + trace.error;
        }
        outcome.traces.push_back(std::move(trace));
        if (failed) {
            break;
        }
    }
    return outcome;
}

SampleOutcome Evolver::run(const IftSample& sample)
{
    if (sample.is_multi_turn()) {
        return evolve_multi_turn(sample);
    }
    SampleOutcome outcome;
    outcome.sample_id = sample.id;
    auto trace = evolve(sample);
    outcome.status = trace.status;
    outcome.error = trace.error;
    outcome.traces.push_back(std::move(trace));
    return outcome;
}

std::vector<RenderedPrompt> Evolver::preview(const IftSample& sample) const
{
    const std::optional<int> turn = sample.is_multi_turn() ? std::optional<int>(0) : std::nullopt;
    const auto structured = render_sample(sample, config_.history_window, turn);
    const auto& current = turn ? sample.turns.front().assistant : sample.response;
    std::vector<RenderedPrompt> out;
    auto add = [&](Role role, Stage stage, std::string user) {
        out.push_back({role, stage, catalog_.role_play(role), std::move(user)});
    };

    const DebateTranscript stand_in{"<positive round-1 argument>", "<critical round-1 argument>",
                                    "<positive round-2 argument>", "<critical round-2 argument>"};
    if (config_.stages.debate) {
        add(Role::Positive, Stage::Round1, catalog_.render_task(Role::Positive, Stage::Round1, {{"sample", structured.text}}));
        add(Role::Critical, Stage::Round1, catalog_.render_task(Role::Critical, Stage::Round1, {{"sample", structured.text}}));
        add(Role::Positive, Stage::Round2, catalog_.render_task(Role::Positive, Stage::Round2, {{"crt_pred", stand_in.crt_pred}}));
        add(Role::Critical, Stage::Round2, catalog_.render_task(Role::Critical, Stage::Round2, {{"pos_pred", stand_in.pos_pred}}));
    }
    if (config_.stages.advise) {
        const auto& shown = config_.stages.advisor_sees_response ? structured.text : structured.request_only_text;
        if (config_.stages.debate) {
            add(Role::Advisor, Stage::Advise,
                catalog_.render_task(Role::Advisor, Stage::Advise,
                                     {{"sample", shown},
                                      {"pos_pred", stand_in.pos_pred},
                                      {"crt_pred", stand_in.crt_pred},
                                      {"pos_free", stand_in.pos_free},
                                      {"crt_free", stand_in.crt_free}}));
        } else {
            add(Role::Advisor, Stage::AdviseSolo, catalog_.render_task(Role::Advisor, Stage::AdviseSolo, {{"sample", shown}}));
        }
        add(Role::Editor, Stage::Edit,
            catalog_.render_task(Role::Editor, Stage::Edit,
                                 {{"adv_sugg", "<advisor suggestions>"},
                                  {"pre_resp", current},
                                  {"sample", structured.request_only_text},
                                  {"sample_request", structured.request_only_text}}));
    } else {
        add(Role::Editor, Stage::EditSolo,
            catalog_.render_task(Role::Editor, Stage::EditSolo, {{"sample_request", structured.request_only_text}}));
    }
    if (config_.stages.judge) {
        const auto [fwd, rev] = catalog_.render_judge_pair(structured.request_only_text, current, "<edited response>");
        add(Role::Judge, Stage::JudgeForward, fwd);
        add(Role::Judge, Stage::JudgeReverse, rev);
    }
    return out;
}

}  // namespace coevol
