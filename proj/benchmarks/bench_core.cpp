#include <benchmark/benchmark.h>

#include <nlohmann/json.hpp>

#include "coevol/evolution.hpp"
#include "coevol/gateway.hpp"
#include "coevol/mock_backend.hpp"
#include "coevol/model.hpp"
#include "coevol/prompt_forge.hpp"

using namespace coevol;
using nlohmann::json;

namespace {

IftSample sample()
{
    IftSample s;
    s.id = "b";
    s.instruction = "Give three tips for staying healthy.";
    s.input = "Keep each tip short.";
    s.response = "1. Eat vegetables.\n2. Sleep eight hours.\n3. Walk daily.";
    return s;
}

void BM_ScoreAndDecide(benchmark::State& state)
{
    const JudgeVerdict a{"", Choice::Second, Order::OriginalFirst, 1};
    const JudgeVerdict b{"", Choice::Equal, Order::EditedFirst, 1};
    for (auto _ : state) {
        auto s = score_pair(a, b);
        benchmark::DoNotOptimize(decide(s));
    }
}
BENCHMARK(BM_ScoreAndDecide);

void BM_RenderSample(benchmark::State& state)
{
    const auto s = sample();
    for (auto _ : state) benchmark::DoNotOptimize(render_sample(s, 3));
}
BENCHMARK(BM_RenderSample);

void BM_RenderJudgePair(benchmark::State& state)
{
    const auto catalog = PromptCatalog::builtin();
    const auto rendered = render_sample(sample(), 3);
    const std::string edited(static_cast<std::size_t>(state.range(0)), 'x');
    for (auto _ : state) {
        benchmark::DoNotOptimize(catalog.render_judge_pair(rendered.request_only_text, sample().response, edited));
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_RenderJudgePair)->Arg(64)->Arg(4096);

// Full three-round loop against an instant scripted backend; measures
// orchestration overhead only.
void BM_EvolveScripted(benchmark::State& state)
{
    const json script = {
        {"entries",
         {{{"role", "positive"}, {"reply", "Looks right."}},
          {{"role", "critical"}, {"reply", "Needs detail."}},
          {{"role", "advisor"}, {"reply", "Add detail.\nGive an example."}},
          {{"role", "editor"}, {"reply", "EDIT-{round}"}},
          {{"role", "judge"}, {"stage", "forward"}, {"reply", "<assistant 2>\nbetter"}},
          {{"role", "judge"}, {"stage", "reverse"}, {"reply", "<assistant 1>\nbetter"}}}}};
    RetryPolicy retry;
    retry.initial_backoff = retry.max_backoff = std::chrono::milliseconds(0);
    const auto catalog = PromptCatalog::builtin();
    const auto s = sample();
    for (auto _ : state) {
        auto mock = ScriptedBackend::from_json(script);
        Gateway gateway(mock, retry, 4);
        Evolver evolver(gateway, catalog, RunConfig{});
        benchmark::DoNotOptimize(evolver.evolve(s));
    }
}
BENCHMARK(BM_EvolveScripted)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
