// Parallel kernels against their serial references on a scaled synthetic ecosystem.

#include "svcevo/community.hpp"
#include "svcevo/explain.hpp"
#include "svcevo/features.hpp"
#include "svcevo/forest.hpp"
#include "svcevo/snapshot.hpp"
#include "svcevo/synth.hpp"
#include "svcevo/tracker.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace svcevo;

namespace {

struct Workload {
    SynthOutput synth;
    EvolutionScript script;
    std::vector<Snapshot> series;
    std::vector<Partition> partitions;
    Dataset data{kSequenceWidth, {"continuing", "growing", "shrinking", "splitting", "merging", "dissolving"}, {}, {}};
    Forest forest;
};

const Workload& workload() {
    static const Workload w = [] {
        Workload w;
        w.script.snapshots = 16;
        w.script.seed = 7;
        for (std::size_t i = 0; i < 80; ++i) w.script.communities.push_back({"c" + std::to_string(i), 10 + i % 8});
        w.synth = generate(w.script);
        w.series = snapshot_series(w.synth.events, w.synth.entities, w.synth.config, w.synth.start,
                                   w.script.period_days, w.synth.end);
        w.partitions = detect_communities(w.series, {7, 1.0, 4});

        std::mt19937_64 rng(3);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (int r = 0; r < 600; ++r) {
            std::vector<double> x(kSequenceWidth);
            for (auto& v : x) v = noise(rng);
            x[r % kSequenceWidth] += 2.0;
            w.data.add(x, static_cast<std::size_t>(r % 6));
        }
        ForestParams p;
        p.n_trees = 100;
        w.forest = train_forest(w.data, p);
        return w;
    }();
    return w;
}

template <bool Parallel>
void BM_snapshot_series(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        auto s = Parallel ? snapshot_series(w.synth.events, w.synth.entities, w.synth.config, w.synth.start,
                                            w.script.period_days, w.synth.end)
                          : snapshot_series_serial(w.synth.events, w.synth.entities, w.synth.config, w.synth.start,
                                                   w.script.period_days, w.synth.end);
        benchmark::DoNotOptimize(s);
    }
}

template <bool Parallel>
void BM_detect_communities(benchmark::State& state) {
    const auto& w = workload();
    const DetectionOptions options{7, 1.0, 4};
    for (auto _ : state) {
        auto p = Parallel ? detect_communities(w.series, options) : detect_communities_serial(w.series, options);
        benchmark::DoNotOptimize(p);
    }
}

template <bool Parallel>
void BM_track(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        auto t = Parallel ? track(w.partitions) : track_serial(w.partitions);
        benchmark::DoNotOptimize(t);
    }
}

template <bool Parallel>
void BM_snapshot_metrics(benchmark::State& state) {
    const auto& snap = workload().series.back();
    for (auto _ : state) {
        auto m = Parallel ? snapshot_metrics(snap) : snapshot_metrics_serial(snap);
        benchmark::DoNotOptimize(m);
    }
}

template <bool Parallel>
void BM_train_forest(benchmark::State& state) {
    const auto& w = workload();
    ForestParams p;
    p.n_trees = 100;
    for (auto _ : state) {
        auto f = Parallel ? train_forest(w.data, p) : train_forest_serial(w.data, p);
        benchmark::DoNotOptimize(f);
    }
}

template <bool Parallel>
void BM_explain_rows(benchmark::State& state) {
    const auto& w = workload();
    const auto rows = w.data.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
    for (auto _ : state) {
        auto e = Parallel ? explain_rows(w.forest, rows) : explain_rows_serial(w.forest, rows);
        benchmark::DoNotOptimize(e);
    }
}

} // namespace

BENCHMARK(BM_snapshot_series<false>)->Name("snapshot_series/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_snapshot_series<true>)->Name("snapshot_series/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_detect_communities<false>)->Name("detect_communities/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_detect_communities<true>)->Name("detect_communities/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_track<false>)->Name("track/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_track<true>)->Name("track/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_snapshot_metrics<false>)->Name("snapshot_metrics/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_snapshot_metrics<true>)->Name("snapshot_metrics/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_train_forest<false>)->Name("train_forest/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_train_forest<true>)->Name("train_forest/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_explain_rows<false>)->Name("explain_rows/serial")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_explain_rows<true>)->Name("explain_rows/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
