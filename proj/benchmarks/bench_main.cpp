// ============================================================
// Microbenchmarks for the hot paths: single-operator cost
// evaluation, full-layer cost evaluation, fusion enumeration,
// genome parsing, and one genetic-search run on a projection
// stage.  Build with -DSAMT_BUILD_BENCHMARKS=ON (default) when
// google-benchmark is installed.
// ============================================================

#include <benchmark/benchmark.h>

#include <random>

#include "samt/costmodel.hpp"
#include "samt/fusion.hpp"
#include "samt/mapping.hpp"
#include "samt/search.hpp"
#include "samt/workload.hpp"

namespace {

using namespace samt;

ModelDims gpt2_dims() {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    return dims;
}

const BaseOp& projection_stage() {
    static const std::vector<BaseOp> layer = build_layer(gpt2_dims());
    return layer.front();  // the d x l x d query projection
}

void bm_evaluate_op(benchmark::State& state) {
    const BaseOp& op = projection_stage();
    const HardwareConfig hw;
    const auto& tmpl = accelerator_template("flexible");
    const Genome genome = default_genome(tmpl, GemmShape::of(op, 1), hw);
    for (auto _ : state) {
        const CostReport r = evaluate_op(op, genome, hw, tmpl, 1);
        benchmark::DoNotOptimize(r.latency_cycles);
    }
}
BENCHMARK(bm_evaluate_op);

void bm_evaluate_layer(benchmark::State& state) {
    const ModelDims dims = gpt2_dims();
    const HardwareConfig hw;
    const auto& tmpl = accelerator_template("flexible");
    const std::vector<BaseOp> layer = build_layer(dims);
    GenomeMap genomes;
    for (const BaseOp& op : layer)
        if (op.kind != OpKind::Elementwise)
            genomes[op.id] = default_genome(tmpl, GemmShape::of(op, dims.bytes_per_element), hw);
    const FusionCode code = FusionCode::parse("110110");
    for (auto _ : state) {
        const LayerReport r = evaluate_layer(code, genomes, dims, hw, tmpl);
        benchmark::DoNotOptimize(r.total.latency_cycles);
    }
}
BENCHMARK(bm_evaluate_layer);

void bm_enumerate_codes(benchmark::State& state) {
    const ModelDims dims = gpt2_dims();
    const HardwareConfig hw;
    for (auto _ : state) {
        const auto infos = enumerate_codes(dims, hw.s2_bytes);
        benchmark::DoNotOptimize(infos.size());
    }
}
BENCHMARK(bm_enumerate_codes);

void bm_parse_genome(benchmark::State& state) {
    const std::string text =
        "TemporalMap(4,4) K; TemporalMap(2,2) N; SpatialMap(16,16) M;\n"
        "Cluster(16);\n"
        "TemporalMap(1,1) M; TemporalMap(1,1) K; SpatialMap(8,8) N;\n";
    for (auto _ : state) {
        const Genome g = Genome::parse(text);
        benchmark::DoNotOptimize(g.cluster_size);
    }
}
BENCHMARK(bm_parse_genome);

void bm_random_genome(benchmark::State& state) {
    const BaseOp& op = projection_stage();
    const HardwareConfig hw;
    const auto& tmpl = accelerator_template("flexible");
    std::mt19937_64 rng(1);
    for (auto _ : state) {
        const Genome g = random_genome(tmpl, GemmShape::of(op, 1), hw, rng);
        benchmark::DoNotOptimize(g.cluster_size);
    }
}
BENCHMARK(bm_random_genome);

void bm_ga_search_gemm(benchmark::State& state) {
    const BaseOp& op = projection_stage();
    const HardwareConfig hw;
    const auto& tmpl = accelerator_template("flexible");
    GaConfig cfg;
    cfg.population_size = 16;
    cfg.generations = static_cast<int>(state.range(0));
    cfg.seed = 3;
    for (auto _ : state) {
        const GemmSearchResult r = ga_search_gemm(op, 1, hw, tmpl, cfg);
        benchmark::DoNotOptimize(r.fitness.latency);
    }
}
BENCHMARK(bm_ga_search_gemm)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
