#include <gtest/gtest.h>

#include "coevol/evolution.hpp"
#include "coevol/mock_backend.hpp"
#include "support.hpp"

using namespace coevol;
using namespace coevol::testing;

namespace {

struct Rig {
    std::shared_ptr<ScriptedBackend> mock;
    PromptCatalog catalog = PromptCatalog::builtin();
    Gateway gateway;
    Evolver evolver;

    explicit Rig(const json& script, RunConfig config = {})
        : mock(ScriptedBackend::from_json(script)),
          gateway(mock, instant_retry(), 4),
          evolver(gateway, catalog, std::move(config))
    {
    }
};

json set_reply(json script, const std::string& role, const std::string& stage, const json& replies)
{
    for (auto& e : script["entries"]) {
        if (e["role"] == role && e["stage"] == stage) {
            e.erase("reply");
            e["replies"] = replies;
        }
    }
    return script;
}

// Invariants every finished trace must satisfy.
void check_trace(const EvolutionTrace& t)
{
    int continues = 0;
    std::string current = t.original_response;
    for (const auto& rec : t.iterations) {
        if (rec.scores) {
            EXPECT_EQ(rec.decision == Decision::Continue, rec.scores->edited > rec.scores->original);
        }
        if (rec.decision == Decision::Continue) {
            ++continues;
            current = rec.edited_response;
        }
    }
    EXPECT_EQ(t.rounds_evolved, continues);
    EXPECT_EQ(t.final_response, current);
    if (t.status == TraceStatus::Ok && !t.iterations.empty()) {
        const bool last_stop = t.iterations.back().decision == Decision::Stop;
        EXPECT_EQ(t.rounds_evolved + (last_stop ? 1 : 0), static_cast<int>(t.iterations.size()));
    }
}

}  // namespace

TEST(Evolve, WinWinLossTrajectory)
{
    Rig rig(loop_script({Verdict::Win, Verdict::Win, Verdict::Loss}));
    const auto t = rig.evolver.evolve(fixture_sample());
    EXPECT_EQ(t.rounds_evolved, 2);
    ASSERT_EQ(t.iterations.size(), 3u);
    EXPECT_EQ(t.final_response, "EDIT-R2-fx");
    EXPECT_EQ(t.iterations[0].decision, Decision::Continue);
    EXPECT_EQ(t.iterations[1].decision, Decision::Continue);
    EXPECT_EQ(t.iterations[2].decision, Decision::Stop);
    EXPECT_EQ(t.iterations[0].scores, (ScorePair{0, 2}));
    EXPECT_EQ(t.iterations[2].scores, (ScorePair{2, 0}));
    for (const auto& rec : t.iterations) EXPECT_EQ(rec.agent_calls, 8);
    EXPECT_EQ(t.agent_calls(), 24);
    EXPECT_EQ(rig.mock->call_count(), 24u);
    check_trace(t);
}

TEST(Evolve, TieTieStopsAfterEightCalls)
{
    Rig rig(loop_script({Verdict::Tie}));
    const auto t = rig.evolver.evolve(fixture_sample());
    EXPECT_EQ(t.rounds_evolved, 0);
    EXPECT_EQ(t.final_response, fixture_sample().response);
    ASSERT_EQ(t.iterations.size(), 1u);
    EXPECT_EQ(t.iterations[0].scores, (ScorePair{2, 2}));
    EXPECT_EQ(rig.mock->call_count(), 8u);
    check_trace(t);
}

TEST(Evolve, RoundCapHonoured)
{
    for (int k : {1, 3, 5}) {
        RunConfig c;
        c.max_rounds = k;
        Rig rig(loop_script({Verdict::Win}), c);
        const auto t = rig.evolver.evolve(fixture_sample());
        EXPECT_EQ(static_cast<int>(t.iterations.size()), k);
        EXPECT_EQ(t.rounds_evolved, k);
        EXPECT_EQ(t.final_response, "EDIT-R" + std::to_string(k) + "-fx");
        EXPECT_EQ(rig.mock->call_count(), static_cast<std::size_t>(8 * k));
    }
    EXPECT_EQ(RunConfig{}.max_rounds, 3);
}

TEST(Evolve, MemoryRefreshedBetweenRounds)
{
    Rig rig(loop_script({Verdict::Win}));
    (void)rig.evolver.evolve(fixture_sample());
    const auto calls = rig.mock->calls();
    for (int k = 1; k <= 2; ++k) {
        const std::string planted = "-R" + std::to_string(k) + "-fx";
        bool saw_edit = false;
        for (const auto& call : calls) {
            if (call.tag.round != k + 1) continue;
            const auto text = request_text(call);
            for (const char* kind : {"POSPRED", "CRTPRED", "POSFREE", "CRTFREE", "ADV", "JDG"}) {
                EXPECT_FALSE(contains(text, std::string("MARK-") + kind + planted))
                    << "round " << k + 1 << " " << to_string(call.tag.role) << " saw " << kind;
            }
            saw_edit = saw_edit || contains(text, "EDIT" + planted);
        }
        // The accepted response is the only thing carried forward.
        EXPECT_TRUE(saw_edit);
    }
}

TEST(Evolve, EveryRoundStartsWithFreshSessions)
{
    Rig rig(loop_script({Verdict::Win}));
    (void)rig.evolver.evolve(fixture_sample());
    for (const auto& call : rig.mock->calls()) {
        const bool keeps_memory = call.tag.stage == Stage::Round2;
        EXPECT_EQ(call.messages.size(), keeps_memory ? 4u : 2u)
            << to_string(call.tag.role) << "/" << to_string(call.tag.stage);
    }
}

TEST(Evolve, AllVerdictPlansKeepTraceInvariants)
{
    const Verdict all[] = {Verdict::Win, Verdict::Loss, Verdict::Tie};
    for (auto a : all) {
        for (auto b : all) {
            for (auto c : all) {
                Rig rig(loop_script({a, b, c}));
                const auto t = rig.evolver.evolve(fixture_sample());
                check_trace(t);
                int expected_rounds = 0;
                for (auto v : {a, b, c}) {
                    ++expected_rounds;
                    if (v != Verdict::Win) break;
                }
                EXPECT_EQ(static_cast<int>(t.iterations.size()), expected_rounds);
                EXPECT_EQ(rig.mock->call_count(), static_cast<std::size_t>(8 * expected_rounds));
            }
        }
    }
}

TEST(Evolve, JudgePromptsSwapOnlyResponses)
{
    Rig rig(loop_script({Verdict::Loss}));
    (void)rig.evolver.evolve(fixture_sample());
    std::string fwd;
    std::string rev;
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.stage == Stage::JudgeForward) fwd = call.messages.back().text;
        if (call.tag.stage == Stage::JudgeReverse) rev = call.messages.back().text;
    }
    const auto original = fixture_sample().response;
    const std::string edited = "EDIT-R1-fx";
    const auto pos_a = fwd.find(original);
    const auto pos_b = fwd.find(edited);
    ASSERT_NE(pos_a, std::string::npos);
    ASSERT_LT(pos_a, pos_b);
    const auto rev_b = rev.find(edited);
    ASSERT_LT(rev_b, rev.find(original));
    std::string swapped = fwd;
    swapped.replace(pos_b, edited.size(), original);
    swapped.replace(pos_a, original.size(), edited);
    EXPECT_EQ(swapped, rev);
}

TEST(Evolve, EditorEchoIsStripped)
{
    auto script = set_reply(loop_script({Verdict::Loss}), "editor", "edit", {"### Response:\nNew text"});
    Rig rig(script);
    EXPECT_EQ(rig.evolver.evolve(fixture_sample()).iterations[0].edited_response, "New text");
    EXPECT_EQ(clean_edit("  New text  "), "New text");
    EXPECT_EQ(clean_edit("### Response:\n### Response:\nX"), "### Response:\nX");
}

TEST(Evolve, EmptyEditStopsWithoutJudging)
{
    auto script = set_reply(loop_script({Verdict::Win}), "editor", "edit", {"  \n "});
    Rig rig(script);
    const auto t = rig.evolver.evolve(fixture_sample());
    ASSERT_EQ(t.iterations.size(), 1u);
    EXPECT_EQ(t.iterations[0].decision, Decision::Stop);
    EXPECT_FALSE(t.iterations[0].verdicts.has_value());
    EXPECT_EQ(t.final_response, fixture_sample().response);
    EXPECT_EQ(rig.mock->call_count(), 6u);
    EXPECT_EQ(t.status, TraceStatus::Ok);
    check_trace(t);
}

TEST(Evolve, UnreadableVerdictIsRetriedOnce)
{
    auto script = set_reply(loop_script({Verdict::Tie}), "judge", "forward",
                            {"Let me think.\n\nAfter review: <equal>", "equal"});
    Rig rig(script);
    const auto t = rig.evolver.evolve(fixture_sample());
    const auto& rec = t.iterations.at(0);
    EXPECT_EQ(rec.verdicts->first.choice, Choice::Equal);
    EXPECT_EQ(rec.verdicts->first.attempts, 2);
    EXPECT_EQ(rec.verdicts->second.attempts, 1);
    EXPECT_EQ(rec.parse_retries, 1);
    EXPECT_EQ(rec.agent_calls, 8);
    EXPECT_EQ(rig.mock->call_count(), 9u);
}

TEST(Evolve, TwiceUnreadableVerdictCountsAsTie)
{
    auto script = set_reply(loop_script({Verdict::Win}), "judge", "forward", {"no idea"});
    Rig rig(script);
    const auto t = rig.evolver.evolve(fixture_sample());
    const auto& rec = t.iterations.at(0);
    EXPECT_EQ(rec.verdicts->first.choice, Choice::Unparseable);
    EXPECT_EQ(rec.verdicts->first.attempts, 2);
    // Reverse says edited wins, forward is a tie: 1 vs 2, edit accepted.
    EXPECT_EQ(rec.scores, (ScorePair{1, 2}));
    EXPECT_EQ(rec.decision, Decision::Continue);
}

TEST(ParseVerdict, Fixtures)
{
    EXPECT_EQ(parse_verdict("<assistant 2>\nbecause"), Choice::Second);
    EXPECT_EQ(parse_verdict("<Assistant 1>"), Choice::First);
    EXPECT_EQ(parse_verdict("ASSISTANT 2 is better"), Choice::Second);
    EXPECT_EQ(parse_verdict("Equal: both responses are fine"), Choice::Equal);
    EXPECT_EQ(parse_verdict("\n\n  <equal>  \n"), Choice::Equal);
    EXPECT_EQ(parse_verdict("Assistant 1 beats assistant 2"), Choice::First);
    EXPECT_EQ(parse_verdict("assistant 12"), std::nullopt);
    EXPECT_EQ(parse_verdict("Let me think.\n<assistant 1>"), std::nullopt);
    EXPECT_EQ(parse_verdict(""), std::nullopt);
}

TEST(Advise, LongListKeptWithWarning)
{
    auto script = set_reply(loop_script({Verdict::Tie}), "advisor", "advise", {"1\n2\n\n3\n4\n5\n"});
    Rig rig(script);
    const auto t = rig.evolver.evolve(fixture_sample());
    const auto& rec = t.iterations.at(0);
    EXPECT_EQ(rec.advisor->suggestions.size(), 5u);
    EXPECT_EQ(rec.warnings.size(), 1u);
}

TEST(Advise, EmptyReplyFailsTheSample)
{
    auto script = set_reply(loop_script({Verdict::Tie}), "advisor", "advise", {" \n\n"});
    Rig rig(script);
    const auto out = rig.evolver.run(fixture_sample());
    EXPECT_TRUE(out.failed());
    EXPECT_EQ(out.traces.at(0).status, TraceStatus::Failed);
    EXPECT_EQ(out.traces.at(0).final_response, fixture_sample().response);
    EXPECT_FALSE(out.error.empty());
}

TEST(Advise, PromptBindsDebateInPrintedOrder)
{
    Rig rig(loop_script({Verdict::Tie}));
    (void)rig.evolver.evolve(fixture_sample());
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.role != Role::Advisor) continue;
        const auto& text = call.messages.back().text;
        const auto a = text.find("MARK-POSPRED");
        const auto b = text.find("MARK-CRTPRED");
        const auto c = text.find("MARK-POSFREE");
        const auto d = text.find("MARK-CRTFREE");
        ASSERT_NE(a, std::string::npos);
        EXPECT_LT(a, b);
        EXPECT_LT(b, c);
        EXPECT_LT(c, d);
        EXPECT_TRUE(contains(text, golden("sample_with_input.txt")));
    }
}

TEST(Edit, PromptBindsSuggestionsAndPreviousResponse)
{
    Rig rig(loop_script({Verdict::Tie}));
    (void)rig.evolver.evolve(fixture_sample());
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.role != Role::Editor) continue;
        const auto& text = call.messages.back().text;
        EXPECT_TRUE(contains(text, "### Writing Suggestions:\nAdd detail MARK-ADV-R1-fx.\nGive an example.\nKeep it concise."));
        EXPECT_TRUE(contains(text, "### Previous Response:\n" + fixture_sample().response));
        EXPECT_TRUE(text.ends_with(golden("request_with_input.txt") + "\n\n### Response:"));
    }
}

TEST(Stages, NoDebateUsesSoloAdvisor)
{
    RunConfig c;
    c.stages.debate = false;
    auto script = loop_script({Verdict::Tie});
    script["entries"].push_back({{"role", "advisor"}, {"stage", "advise_solo"}, {"reply", "Be specific."}});
    Rig rig(script, c);
    const auto t = rig.evolver.evolve(fixture_sample());
    EXPECT_FALSE(t.iterations.at(0).debate.has_value());
    EXPECT_EQ(t.iterations.at(0).agent_calls, 4);
    EXPECT_EQ(rig.mock->call_count(), 4u);
}

TEST(Stages, NoAdviseRunsEditorAlone)
{
    RunConfig c;
    c.stages.debate = false;
    c.stages.advise = false;
    auto script = loop_script({Verdict::Tie});
    script["entries"].push_back({{"role", "editor"}, {"stage", "edit_solo"}, {"reply", "Direct answer."}});
    Rig rig(script, c);
    const auto t = rig.evolver.evolve(fixture_sample());
    EXPECT_EQ(t.iterations.at(0).edited_response, "Direct answer.");
    EXPECT_EQ(rig.mock->call_count(), 3u);
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.role == Role::Editor) {
            EXPECT_EQ(call.tag.stage, Stage::EditSolo);
            EXPECT_FALSE(contains(call.messages.back().text, fixture_sample().response));
        }
    }
}

TEST(Stages, NoJudgeAcceptsSingleEdit)
{
    RunConfig c;
    c.stages.judge = false;
    Rig rig(loop_script({Verdict::Loss}), c);
    const auto t = rig.evolver.evolve(fixture_sample());
    ASSERT_EQ(t.iterations.size(), 1u);
    EXPECT_EQ(t.iterations[0].decision, Decision::Continue);
    EXPECT_EQ(t.final_response, "EDIT-R1-fx");
    EXPECT_EQ(rig.mock->call_count(), 6u);
    check_trace(t);
}

TEST(Stages, AdvisorCanBeDeniedTheResponse)
{
    RunConfig c;
    c.stages.advisor_sees_response = false;
    Rig rig(loop_script({Verdict::Tie}), c);
    (void)rig.evolver.evolve(fixture_sample());
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.role == Role::Advisor) {
            EXPECT_FALSE(contains(call.messages.back().text, fixture_sample().response));
        }
    }
}

TEST(Evolve, BackendFailureMarksTraceFailed)
{
    auto script = loop_script({Verdict::Win});
    script["entries"].push_back({{"role", "editor"}, {"stage", "edit"}, {"round", 2}, {"fail_always", "permanent"}});
    Rig rig(script);
    const auto t = rig.evolver.evolve(fixture_sample());
    EXPECT_EQ(t.status, TraceStatus::Failed);
    EXPECT_NE(t.error.find("editor"), std::string::npos);
    EXPECT_EQ(t.iterations.size(), 1u);
    EXPECT_EQ(t.final_response, "EDIT-R1-fx");
    check_trace(t);
}

TEST(Evolve, RejectsWrongShape)
{
    Rig rig(loop_script({Verdict::Tie}));
    EXPECT_THROW(rig.evolver.evolve(conversation(2)), ValidationError);
    EXPECT_THROW(rig.evolver.evolve_multi_turn(fixture_sample()), ValidationError);
}

TEST(MultiTurn, TurnFivePromptsHoldRoundsTwoToFour)
{
    Rig rig(loop_script({Verdict::Tie}));
    const auto out = rig.evolver.evolve_multi_turn(conversation(5));
    ASSERT_EQ(out.traces.size(), 5u);
    int checked = 0;
    for (const auto& call : rig.mock->calls()) {
        if (call.tag.turn != 4) continue;
        const auto text = request_text(call);
        EXPECT_FALSE(contains(text, "u0")) << to_string(call.tag.role);
        EXPECT_FALSE(contains(text, "a0")) << to_string(call.tag.role);
        for (int i = 1; i <= 3; ++i) {
            EXPECT_TRUE(contains(text, "User: u" + std::to_string(i) + "\nAssistant: a" + std::to_string(i)));
        }
        EXPECT_TRUE(contains(text, "User: u4"));
        ++checked;
    }
    EXPECT_EQ(checked, 8);
}

TEST(MultiTurn, RefinedEarlierTurnsBecomeContext)
{
    auto script = loop_script({Verdict::Win, Verdict::Loss});
    script = set_reply(script, "editor", "edit", {"EDIT-T{turn}-R{round}"});
    {
        Rig rig(script);
        const auto out = rig.evolver.evolve_multi_turn(conversation(2));
        EXPECT_EQ(out.traces.at(0).final_response, "EDIT-T0-R1");
        bool seen = false;
        for (const auto& call : rig.mock->calls()) {
            if (call.tag.turn == 1) {
                EXPECT_FALSE(contains(request_text(call), "Assistant: a0"));
                seen = seen || contains(request_text(call), "Assistant: EDIT-T0-R1");
            }
        }
        EXPECT_TRUE(seen);
        EXPECT_EQ(out.traces.at(1).original_response, "a1");
    }
    {
        RunConfig c;
        c.refined_context = false;
        Rig rig(script, c);
        (void)rig.evolver.evolve_multi_turn(conversation(2));
        for (const auto& call : rig.mock->calls()) {
            if (call.tag.turn == 1 && call.tag.role == Role::Positive && call.tag.stage == Stage::Round1) {
                EXPECT_TRUE(contains(request_text(call), "Assistant: a0"));
                EXPECT_FALSE(contains(request_text(call), "EDIT-T0"));
            }
        }
    }
}

TEST(MultiTurn, SingleTurnConversationMatchesPlainEvolve)
{
    Rig a(loop_script({Verdict::Win, Verdict::Loss}));
    Rig b(loop_script({Verdict::Win, Verdict::Loss}));
    const auto conv = a.evolver.evolve_multi_turn(conversation(1));
    IftSample single{"conv", "", std::nullopt, {}, "a0"};
    const auto plain = b.evolver.evolve(single);
    ASSERT_EQ(conv.traces.size(), 1u);
    EXPECT_EQ(conv.traces[0].rounds_evolved, plain.rounds_evolved);
    EXPECT_EQ(conv.traces[0].final_response, plain.final_response);
    EXPECT_EQ(conv.traces[0].iterations.size(), plain.iterations.size());
    EXPECT_EQ(a.mock->call_count(), b.mock->call_count());
}

TEST(MultiTurn, FailureStopsRemainingTurns)
{
    auto script = loop_script({Verdict::Tie});
    script["entries"].push_back({{"role", "editor"}, {"stage", "edit"}, {"turn", 2}, {"fail_always", "permanent"}});
    Rig rig(script);
    const auto out = rig.evolver.evolve_multi_turn(conversation(4));
    EXPECT_EQ(out.status, TraceStatus::Partial);
    ASSERT_EQ(out.traces.size(), 3u);
    EXPECT_EQ(out.traces[2].status, TraceStatus::Failed);

    auto first = loop_script({Verdict::Tie});
    first["entries"].push_back({{"role", "editor"}, {"stage", "edit"}, {"turn", 0}, {"fail_always", "permanent"}});
    Rig rig2(first);
    const auto out2 = rig2.evolver.evolve_multi_turn(conversation(4));
    EXPECT_EQ(out2.status, TraceStatus::Failed);
    EXPECT_EQ(out2.traces.size(), 1u);
}

TEST(Preview, MakesNoCalls)
{
    Rig rig(loop_script({Verdict::Tie}));
    const auto prompts = rig.evolver.preview(fixture_sample());
    EXPECT_EQ(prompts.size(), 8u);
    EXPECT_EQ(rig.mock->call_count(), 0u);
    EXPECT_EQ(prompts[0].user, golden("positive_round1.txt"));
    EXPECT_EQ(prompts[0].system, golden("roleplay_positive.txt"));
}
