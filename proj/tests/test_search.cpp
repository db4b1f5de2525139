#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "samt/errors.hpp"
#include "samt/search.hpp"

using namespace samt;

namespace {

ModelDims small_model() {
    ModelDims dims;
    dims.d = 64;
    dims.l = 64;
    dims.n_h = 4;
    return dims;
}

GaConfig quick_ga(std::uint64_t seed) {
    GaConfig cfg;
    cfg.population_size = 8;
    cfg.generations = 4;
    cfg.seed = seed;
    return cfg;
}

std::string genomes_text(const std::vector<Genome>& genomes) {
    std::string out;
    for (const auto& g : genomes) out += g.str() + "\n";
    return out;
}

}  // namespace

TEST_CASE("fitness comparisons") {
    const Fitness a{100.0, 50.0};
    const Fitness b{100.0, 60.0};
    const Fitness c{99.0, 500.0};
    CHECK(strictly_better(a, b));       // same latency, less energy
    CHECK(strictly_better(c, a));       // lower latency wins outright
    CHECK(!strictly_better(a, a));
    CHECK(!strictly_better(b, a));

    // within the band, energy decides; outside it, latency does
    CHECK(banded_better(Fitness{1000.0, 10.0}, Fitness{1000.5, 20.0}));
    CHECK(!banded_better(Fitness{1000.0, 20.0}, Fitness{1000.5, 10.0}));
    CHECK(banded_better(Fitness{900.0, 999.0}, Fitness{1000.0, 1.0}));
    CHECK(!banded_better(a, a));  // exact tie keeps the incumbent
    CHECK(banded_better(Fitness{100.0, 49.0}, a));
}

TEST_CASE("dataflow modes per template") {
    CHECK(dataflow_modes(accelerator_template("flexible")) ==
          std::vector<DataflowMode>{DataflowMode::Flexible, DataflowMode::Fixed});
    for (const char* name : {"shidiannao", "nvdla", "eyeriss", "tpu"})
        CHECK(dataflow_modes(accelerator_template(name)) ==
              std::vector<DataflowMode>{DataflowMode::Fixed});
    CHECK(std::string(dataflow_mode_name(DataflowMode::Fixed)) == "fixed");
    CHECK(std::string(dataflow_mode_name(DataflowMode::Flexible)) == "flexible");
}

TEST_CASE("search config validation") {
    CHECK(GaConfig{}.validate().empty());
    auto expect_bad = [](GaConfig cfg) {
        CHECK(!cfg.validate().empty());
        CHECK_THROWS_AS(cfg.ensure_valid(), ValidationError);
    };
    GaConfig cfg;
    cfg.population_size = 0;
    expect_bad(cfg);
    cfg = GaConfig{};
    cfg.generations = -1;
    expect_bad(cfg);
    cfg = GaConfig{};
    cfg.crossover_rate = 1.5;
    expect_bad(cfg);
    cfg = GaConfig{};
    cfg.mutation_rate = -0.1;
    expect_bad(cfg);
    cfg = GaConfig{};
    cfg.elite_fraction = 2.0;
    expect_bad(cfg);
    cfg = GaConfig{};
    cfg.fitness_threshold = 1.1;
    expect_bad(cfg);
}

TEST_CASE("exhaustive search refuses oversized spaces") {
    const BaseOp op = testutil::make_gemm(5120, 1024, 5120);
    const HardwareConfig hw = testutil::roomy_hw(256);
    CHECK_THROWS_AS(static_cast<void>(exhaustive_search_gemm(op, 2, hw,
                                                             accelerator_template("flexible"))),
                    ValidationError);
    try {
        static_cast<void>(
            exhaustive_search_gemm(op, 2, hw, accelerator_template("flexible"), 1000));
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("beyond the cap") != std::string::npos);
    }
}

TEST_CASE("exhaustive search finds the perfectly packed mapping") {
    // 2x3x3 over six PEs can finish in three cycles at full utilization
    const BaseOp op = testutil::make_gemm(2, 3, 3);
    HardwareConfig hw = testutil::roomy_hw(6);
    hw.bw_noc_bytes_per_s = 1e12;
    hw.bw_offchip_bytes_per_s = 1e12;
    const auto r = exhaustive_search_gemm(op, 1, hw, accelerator_template("flexible"));
    CHECK(r.fitness.latency == 3.0);
    CHECK(r.evaluated > 0);
    const auto check = evaluate_op(op, r.best, hw, accelerator_template("flexible"), 1);
    CHECK(check.latency_cycles == 3.0);
    CHECK(check.pe_utilization == doctest::Approx(1.0));
}

TEST_CASE("ga reaches the exhaustive optimum on a small operator") {
    const BaseOp op = testutil::make_gemm(4, 4, 4);
    const HardwareConfig hw = testutil::roomy_hw(4);
    const auto& flex = accelerator_template("flexible");
    const auto oracle = exhaustive_search_gemm(op, 1, hw, flex);

    GaConfig cfg;
    cfg.population_size = 32;
    cfg.generations = 50;
    cfg.seed = 1;
    const auto ga = ga_search_gemm(op, 1, hw, flex, cfg);
    CHECK(ga.fitness.latency == oracle.fitness.latency);

    REQUIRE(ga.trace.size() == static_cast<std::size_t>(cfg.generations + 1));
    for (std::size_t i = 1; i < ga.trace.size(); ++i)
        CHECK(ga.trace[i].best_latency <= ga.trace[i - 1].best_latency);
    // the winner re-evaluates to its reported fitness
    const auto check = evaluate_op(op, ga.best, hw, flex, 1);
    CHECK(check.latency_cycles == ga.fitness.latency);
    CHECK(check.energy == ga.fitness.energy);
}

TEST_CASE("ga runs are reproducible for a fixed seed") {
    const BaseOp op = testutil::make_gemm(12, 8, 6);
    const HardwareConfig hw = testutil::roomy_hw(8);
    const auto& flex = accelerator_template("flexible");
    GaConfig cfg;
    cfg.population_size = 16;
    cfg.generations = 10;
    cfg.seed = 42;
    const auto a = ga_search_gemm(op, 1, hw, flex, cfg);
    const auto b = ga_search_gemm(op, 1, hw, flex, cfg);
    CHECK(a.best == b.best);
    CHECK(a.fitness.latency == b.fitness.latency);
    CHECK(a.fitness.energy == b.fitness.energy);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].best_latency == b.trace[i].best_latency);
        CHECK(a.trace[i].best_energy == b.trace[i].best_energy);
    }
}

TEST_CASE("ga rejects operators that take no genome") {
    ModelDims dims = small_model();
    const auto layer = build_layer(dims);
    const auto softmax = std::find_if(layer.begin(), layer.end(), [](const BaseOp& op) {
        return op.kind == OpKind::Elementwise;
    });
    REQUIRE(softmax != layer.end());
    CHECK_THROWS_AS(static_cast<void>(ga_search_gemm(*softmax, 1, testutil::roomy_hw(4),
                                                     accelerator_template("flexible"),
                                                     quick_ga(0))),
                    ValidationError);
}

TEST_CASE("code search pre-checks the fusion working set") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    HardwareConfig hw = testutil::roomy_hw(16);
    hw.s2_bytes = 12ll * 1024 * 1024;
    const auto r = ga_search_code(FusionCode::parse("010000"), DataflowMode::Fixed, dims, hw,
                                  accelerator_template("flexible"), quick_ga(0));
    CHECK(!r.feasible);
    CHECK(r.message.find("bytes of S2") != std::string::npos);
    CHECK(r.s2_required_bytes > hw.s2_bytes);
    CHECK(r.genomes.empty());
}

TEST_CASE("full search is deterministic across thread counts") {
    const ModelDims dims = small_model();
    HardwareConfig hw = testutil::roomy_hw(16);
    hw.s1_bytes = 1024;
    hw.s2_bytes = 1 << 20;
    const auto& flex = accelerator_template("flexible");
    const GaConfig cfg = quick_ga(7);

    const auto one = full_search(dims, hw, flex, cfg, 1);
    const auto three = full_search(dims, hw, flex, cfg, 3);
    REQUIRE(one.entries.size() == three.entries.size());
    CHECK(one.entries.size() == 128);  // 64 codes x two dataflow modes
    CHECK(one.best_index == three.best_index);
    CHECK(one.pareto == three.pareto);
    for (std::size_t i = 0; i < one.entries.size(); ++i) {
        const auto& x = one.entries[i];
        const auto& y = three.entries[i];
        CHECK(x.code == y.code);
        CHECK(x.mode == y.mode);
        CHECK(x.feasible == y.feasible);
        if (!x.feasible) continue;
        CHECK(x.fitness.latency == y.fitness.latency);
        CHECK(x.fitness.energy == y.fitness.energy);
        CHECK(genomes_text(x.genomes) == genomes_text(y.genomes));
    }

    // entries are code-ascending with modes inner
    for (std::size_t i = 1; i < one.entries.size(); ++i)
        CHECK(one.entries[i].code.value() >= one.entries[i - 1].code.value());

    // the pareto front is mutually non-dominated and contains the best
    const auto dominated = [&](const CodeSearchResult& a, const CodeSearchResult& b) {
        return b.fitness.latency <= a.fitness.latency && b.fitness.energy <= a.fitness.energy &&
               (b.fitness.latency < a.fitness.latency || b.fitness.energy < a.fitness.energy);
    };
    for (const std::size_t i : one.pareto) {
        REQUIRE(one.entries[i].feasible);
        for (const auto& other : one.entries)
            if (other.feasible) CHECK(!dominated(one.entries[i], other));
    }
    CHECK(std::find(one.pareto.begin(), one.pareto.end(), one.best_index) != one.pareto.end());
    CHECK(one.best().feasible);
}

TEST_CASE("full search reports total infeasibility") {
    const ModelDims dims = small_model();
    HardwareConfig hw = testutil::roomy_hw(16);
    hw.s2_bytes = 1;  // nothing fits
    CHECK_THROWS_AS(static_cast<void>(full_search(dims, hw, accelerator_template("flexible"),
                                                  quick_ga(0), 2)),
                    FeasibilityError);
}
