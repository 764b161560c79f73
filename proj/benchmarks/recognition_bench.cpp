#include <benchmark/benchmark.h>

#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/pose_features.hpp"
#include "rhyme_mimic/synthetic.hpp"

using namespace rhyme_mimic;

namespace {

std::vector<UpperBodyJoints> sample_bodies(std::size_t n) {
    Rng rng = make_rng(3);
    std::vector<UpperBodyJoints> out;
    const auto& anchors = rhyme_anchor_poses();
    while (out.size() < n) {
        const auto frame = sample_skeleton(anchors[out.size() % anchors.size()], {3.0, true, 0.6, 0.95}, rng);
        out.push_back(std::get<UpperBodyJoints>(select_upper_body(frame, {})));
    }
    return out;
}

}  // namespace

static void BM_Normalize(benchmark::State& state) {
    const auto bodies = sample_bodies(256);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(normalize(bodies[i++ % bodies.size()]));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normalize);

static void BM_Classify(benchmark::State& state) {
    SyntheticDatasetConfig cfg;
    TrainingConfig tc;
    tc.components_per_class = static_cast<std::size_t>(state.range(0));
    tc.covariance_kind = state.range(1) != 0 ? CovarianceKind::full : CovarianceKind::diagonal;
    cfg.per_class = 60;
    const auto data = generate_dataset(cfg);
    const auto model = train(data, tc);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.classify(data.records[i++ % data.records.size()].features));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Classify)->Args({1, 0})->Args({3, 0})->Args({1, 1})->Args({3, 1});

static void BM_Train(benchmark::State& state) {
    SyntheticDatasetConfig cfg;
    cfg.per_class = static_cast<std::size_t>(state.range(0));
    const auto data = generate_dataset(cfg);
    TrainingConfig tc;
    tc.components_per_class = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(train(data, tc));
}
BENCHMARK(BM_Train)->Args({30, 1})->Args({30, 2})->Args({200, 2})->Unit(benchmark::kMillisecond);

static void BM_EndToEndFrame(benchmark::State& state) {
    const auto model = train(generate_dataset({}), {});
    const auto script = default_rhyme_script();
    SessionStreamConfig sc;
    sc.imitated.assign(script.lines.size(), true);
    const auto stream = generate_session_stream(script, LatencyModel{}, sc);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(classify_frame(stream.frames[i++ % stream.frames.size()].people, model, {}));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EndToEndFrame);
