#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "oracle.hpp"
#include "samt/costmodel.hpp"
#include "samt/errors.hpp"
#include "samt/fusion.hpp"
#include "samt/search.hpp"

using namespace samt;
using i64 = std::int64_t;

namespace {

Genome parse(const std::string& text) { return Genome::parse(text); }

ModelDims headless_bert() {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 1;
    return dims;
}

GenomeMap single_tile_map(const ModelDims& dims) {
    const auto layer = build_layer(dims);
    GenomeMap map;
    for (const auto& op : layer)
        if (op.kind != OpKind::Elementwise)
            map.emplace(op.id, testutil::single_tile_genome(op.m, op.n, op.k));
    return map;
}

}  // namespace

TEST_CASE("single-PE full-tile anchor") {
    const BaseOp op = testutil::make_gemm(2, 2, 2);
    const HardwareConfig hw = testutil::roomy_hw(1);
    const auto& flex = accelerator_template("flexible");
    const CostReport r = evaluate_op(op, testutil::single_tile_genome(2, 2, 2), hw, flex, 1);
    CHECK(r.acc_s3_bytes == 12);  // 4 + 4 + 4 operand elements, streamed once
    CHECK(r.compute_cycles == 8);
    CHECK(r.mac_count == 8);
    CHECK(r.flop_count == 16);
    CHECK(r.pe_utilization == doctest::Approx(1.0));
    CHECK(r.latency_cycles == doctest::Approx(8.0));
    REQUIRE(r.tensors.size() == 3);
    CHECK(r.tensors[0].s3_bytes == 4);
    CHECK(r.tensors[2].s3_bytes == 4);
}

TEST_CASE("half-utilization anchor: six lanes over a 3x3x3 problem") {
    const BaseOp op = testutil::make_gemm(3, 3, 3);
    const HardwareConfig hw = testutil::roomy_hw(6);
    const auto& flex = accelerator_template("flexible");
    const Genome g = parse(
        "TemporalMap(3,3) M; TemporalMap(3,3) N; SpatialMap(3,3) K;\n"
        "Cluster(6);\n"
        "TemporalMap(1,1) M; TemporalMap(1,1) N; SpatialMap(1,1) K;\n");
    const CostReport r = evaluate_op(op, g, hw, flex, 1);
    CHECK(r.acc_s3_bytes == 27);
    CHECK(r.acc_s2_bytes == 45);
    CHECK(r.acc_s1_bytes == 63);
    CHECK(r.compute_cycles == 9);
    CHECK(r.mac_count == 27);
    // 3 of 6 PEs busy: K only spans three lanes
    CHECK(r.pe_utilization == doctest::Approx(0.5));
}

TEST_CASE("full-utilization anchor: lanes exactly cover the problem") {
    const BaseOp op = testutil::make_gemm(2, 3, 3);
    const HardwareConfig hw = testutil::roomy_hw(6);
    const auto& flex = accelerator_template("flexible");
    const Genome g = parse(
        "TemporalMap(2,2) M; TemporalMap(3,3) K; SpatialMap(1,1) N;\n"
        "Cluster(2);\n"
        "TemporalMap(1,1) N; TemporalMap(3,3) K; SpatialMap(1,1) M;\n");
    const CostReport r = evaluate_op(op, g, hw, flex, 1);
    CHECK(r.compute_cycles == 3);
    CHECK(r.mac_count == 18);
    CHECK(r.pe_utilization == doctest::Approx(1.0));
}

TEST_CASE("counters match the step-level reference simulator") {
    const auto& flex = accelerator_template("flexible");
    std::mt19937_64 rng(11);
    for (const i64 p : {1, 2, 4}) {
        const HardwareConfig hw = testutil::roomy_hw(p);
        for (i64 m = 1; m <= 3; ++m)
            for (i64 n = 1; n <= 3; ++n)
                for (i64 k = 1; k <= 3; ++k) {
                    const BaseOp op = testutil::make_gemm(m, n, k);
                    for (int trial = 0; trial < 8; ++trial) {
                        const Genome g = random_genome(flex, GemmShape::of(op, 1), hw, rng);
                        const CostReport r = evaluate_op(op, g, hw, flex, 1);
                        const auto ref = simref::simulate_gemm(m, n, k, 1, g, p, false, 1, 0);
                        CAPTURE(m);
                        CAPTURE(n);
                        CAPTURE(k);
                        CAPTURE(p);
                        CAPTURE(g.str());
                        REQUIRE(r.acc_s3_bytes == ref.s3_bytes);
                        REQUIRE(r.acc_s2_bytes == ref.s2_bytes);
                        REQUIRE(r.acc_s1_bytes == ref.s1_bytes);
                        REQUIRE(r.compute_cycles == ref.compute_cycles);
                    }
                }
    }
}

TEST_CASE("forwarding dataflow matches the reference simulator") {
    const auto& shi = accelerator_template("shidiannao");
    const HardwareConfig hw = testutil::roomy_hw(16);
    std::mt19937_64 rng(5);
    for (const auto [m, n, k] : {std::array<i64, 3>{8, 16, 4}, {4, 4, 4}, {16, 32, 8}}) {
        const BaseOp op = testutil::make_gemm(m, n, k);
        for (int trial = 0; trial < 10; ++trial) {
            const Genome g = random_genome(shi, GemmShape::of(op, 2), hw, rng);
            const CostReport r = evaluate_op(op, g, hw, shi, 2);
            const auto ref = simref::simulate_gemm(m, n, k, 1, g, 16, true, 2, 0);
            CAPTURE(g.str());
            REQUIRE(r.acc_s1_bytes == ref.s1_bytes);
            REQUIRE(r.acc_s2_bytes == ref.s2_bytes);
            REQUIRE(r.acc_s3_bytes == ref.s3_bytes);
            REQUIRE(r.compute_cycles == ref.compute_cycles);
        }
    }
}

TEST_CASE("batched operators scale every counter linearly") {
    const auto& flex = accelerator_template("flexible");
    const HardwareConfig hw = testutil::roomy_hw(4);
    const BaseOp single = testutil::make_gemm(6, 8, 4);
    const BaseOp batched = testutil::make_gemm(6, 8, 4, 12);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Genome g = random_genome(flex, GemmShape::of(single, 1), hw, rng);
        const CostReport a = evaluate_op(single, g, hw, flex, 1);
        const CostReport b = evaluate_op(batched, g, hw, flex, 1);
        CHECK(b.acc_s1_bytes == 12 * a.acc_s1_bytes);
        CHECK(b.acc_s2_bytes == 12 * a.acc_s2_bytes);
        CHECK(b.acc_s3_bytes == 12 * a.acc_s3_bytes);
        CHECK(b.compute_cycles == 12 * a.compute_cycles);
        CHECK(b.mac_count == 12 * a.mac_count);
    }
}

TEST_CASE("derived quantities follow the roofline") {
    const auto& flex = accelerator_template("flexible");
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const i64 m = 1 + static_cast<i64>(rng() % 32);
        const i64 n = 1 + static_cast<i64>(rng() % 32);
        const i64 k = 1 + static_cast<i64>(rng() % 32);
        HardwareConfig hw = testutil::roomy_hw(1ll << (rng() % 5));
        const BaseOp op = testutil::make_gemm(m, n, k);
        const Genome g = random_genome(flex, GemmShape::of(op, 2), hw, rng);
        const CostReport r = evaluate_op(op, g, hw, flex, 2);
        CHECK(r.mac_count == m * n * k);
        CHECK(r.compute_cycles * hw.pe_count >= r.mac_count);
        const double mem = std::max(r.acc_s3_bytes / hw.offchip_bytes_per_cycle(),
                                    r.acc_s2_bytes / hw.noc_bytes_per_cycle());
        CHECK(r.mem_bound_cycles == doctest::Approx(mem));
        CHECK(r.latency_cycles ==
              doctest::Approx(std::max(static_cast<double>(r.compute_cycles), mem)));
        const double energy = r.mac_count * hw.energy.e_mac + r.acc_s1_bytes * hw.energy.e_s1 +
                              r.acc_s2_bytes * hw.energy.e_s2 + r.acc_s3_bytes * hw.energy.e_s3;
        CHECK(r.energy == doctest::Approx(energy));
        CHECK(r.pe_utilization ==
              doctest::Approx(static_cast<double>(r.mac_count) /
                              (static_cast<double>(r.compute_cycles) * hw.pe_count)));
    }
}

TEST_CASE("elementwise operators stream once and spread their work") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 512;
    dims.n_h = 12;
    const auto layer = build_layer(dims);
    const auto softmax =
        std::find_if(layer.begin(), layer.end(),
                     [](const BaseOp& op) { return op.kind == OpKind::Elementwise; });
    REQUIRE(softmax != layer.end());
    HardwareConfig hw = testutil::roomy_hw(256);
    const CostReport r = evaluate_elementwise(*softmax, hw, 1);
    CHECK(r.flop_count == softmax->flops());
    CHECK(r.mac_count == 0);
    CHECK(r.acc_s3_bytes == softmax->mops(1));
    CHECK(r.compute_cycles == (r.flop_count + 255) / 256);
    CHECK(r.latency_cycles >= r.compute_cycles);
}

TEST_CASE("fusing keeps internal tensors on chip") {
    const ModelDims dims = headless_bert();
    const auto layer = build_layer(dims);
    const HardwareConfig hw = testutil::roomy_hw(1);
    const auto& flex = accelerator_template("flexible");
    const GenomeMap genomes = single_tile_map(dims);

    const LayerReport unfused = evaluate_layer(FusionCode::parse("000000"), genomes, dims, hw, flex);
    const LayerReport fused = evaluate_layer(FusionCode::parse("100000"), genomes, dims, hw, flex);
    REQUIRE(unfused.feasible);
    REQUIRE(fused.feasible);

    const i64 B = dims.bytes_per_element;
    const i64 d = dims.d, l = dims.l;
    const i64 reduced = chain_memory_reduced(FusionCode::parse("100000"), dims) * B;
    CHECK(reduced == 5 * d * l * B);
    CHECK(fused.total.acc_s3_bytes == unfused.total.acc_s3_bytes - reduced);
    // the write+read of the internal Q and K move to S2 (4dl); the
    // shared read of X is deduplicated outright (the remaining dl)
    CHECK(fused.total.acc_s2_bytes == unfused.total.acc_s2_bytes + 4 * d * l * B);
    CHECK(fused.total.compute_cycles == unfused.total.compute_cycles);
    CHECK(fused.total.mac_count == unfused.total.mac_count);
    CHECK(fused.total.energy < unfused.total.energy);
}

TEST_CASE("layer totals are the sum of their chains") {
    const ModelDims dims = headless_bert();
    const HardwareConfig hw = testutil::roomy_hw(1);
    const auto& flex = accelerator_template("flexible");
    const GenomeMap genomes = single_tile_map(dims);
    for (const char* bits : {"000000", "110110", "111111", "010000"}) {
        const LayerReport lr = evaluate_layer(FusionCode::parse(bits), genomes, dims, hw, flex);
        REQUIRE(lr.feasible);
        i64 s1 = 0, s2 = 0, s3 = 0, cc = 0, mac = 0;
        double energy = 0.0, latency = 0.0;
        for (const auto& chain : lr.chains) {
            s1 += chain.total.acc_s1_bytes;
            s2 += chain.total.acc_s2_bytes;
            s3 += chain.total.acc_s3_bytes;
            cc += chain.total.compute_cycles;
            mac += chain.total.mac_count;
            energy += chain.total.energy;
            latency += chain.total.latency_cycles;
        }
        CHECK(lr.total.acc_s1_bytes == s1);
        CHECK(lr.total.acc_s2_bytes == s2);
        CHECK(lr.total.acc_s3_bytes == s3);
        CHECK(lr.total.compute_cycles == cc);
        CHECK(lr.total.mac_count == mac);
        CHECK(lr.total.energy == doctest::Approx(energy));
        CHECK(lr.total.latency_cycles == doctest::Approx(latency));
        // every operator appears exactly once across the chains
        std::size_t stages = 0;
        for (const auto& chain : lr.chains) stages += chain.stages.size();
        CHECK(stages == 9);
    }
}

TEST_CASE("a chain too large for S2 reports the offending tensor") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    HardwareConfig hw = testutil::roomy_hw(1);
    hw.s2_bytes = 12ll * 1024 * 1024;
    const auto& flex = accelerator_template("flexible");
    const GenomeMap genomes = single_tile_map(dims);
    const LayerReport lr = evaluate_layer(FusionCode::parse("010000"), genomes, dims, hw, flex);
    CHECK(!lr.feasible);
    CHECK(lr.message.find("Op2") != std::string::npos);
    CHECK(lr.message.find("A") != std::string::npos);
}

TEST_CASE("evaluation rejects bad inputs") {
    const BaseOp op = testutil::make_gemm(4, 4, 4);
    const HardwareConfig hw = testutil::roomy_hw(4);
    const auto& flex = accelerator_template("flexible");

    Genome skewed = testutil::single_tile_genome(4, 4, 4);
    skewed.inter.directives[0].offset = 2;
    CHECK_THROWS_WITH_AS(static_cast<void>(evaluate_op(op, skewed, hw, flex, 1)),
                         "cost evaluation requires offset == size for every directive",
                         ValidationError);

    // a genome whose structure belongs to another template is rejected
    CHECK_THROWS_AS(static_cast<void>(evaluate_op(op, testutil::single_tile_genome(4, 4, 4), hw,
                                                  accelerator_template("tpu"), 1)),
                    ValidationError);

    // elementwise operators ignore the genome and delegate
    const BaseOp softmax = [] {
        ModelDims dims;
        const auto layer = build_layer(dims);
        return *std::find_if(layer.begin(), layer.end(),
                             [](const BaseOp& o) { return o.kind == OpKind::Elementwise; });
    }();
    const CostReport via_op =
        evaluate_op(softmax, testutil::single_tile_genome(1, 1, 1), hw, flex, 1);
    const CostReport direct = evaluate_elementwise(softmax, hw, 1);
    CHECK(via_op.flop_count == direct.flop_count);
    CHECK(via_op.acc_s3_bytes == direct.acc_s3_bytes);
    CHECK(via_op.latency_cycles == doctest::Approx(direct.latency_cycles));
}

TEST_CASE("genome bookkeeping for a layer") {
    const ModelDims dims = headless_bert();
    const auto layer = build_layer(dims);
    const auto ids = gemm_stage_ids(layer);
    REQUIRE(ids.size() == 8);  // nine operators minus the elementwise softmax
    CHECK(std::count(ids.begin(), ids.end(), OpId::Softmax) == 0);
    CHECK(ids.front() == OpId::QProj);
    CHECK(ids.back() == OpId::FFN2);

    std::vector<Genome> genomes;
    for (const auto id : ids) {
        const auto& op = *std::find_if(layer.begin(), layer.end(),
                                       [&](const BaseOp& o) { return o.id == id; });
        genomes.push_back(testutil::single_tile_genome(op.m, op.n, op.k));
    }
    const GenomeMap map = genome_map_for_layer(layer, genomes);
    CHECK(map.size() == 8);

    std::vector<Genome> short_list(genomes.begin(), genomes.begin() + 3);
    CHECK_THROWS_AS(static_cast<void>(genome_map_for_layer(layer, short_list)), ValidationError);

    GenomeMap missing = map;
    missing.erase(OpId::FFN2);
    const HardwareConfig hw = testutil::roomy_hw(1);
    CHECK_THROWS_WITH_AS(static_cast<void>(evaluate_layer(FusionCode::parse("000000"), missing,
                                                          dims, hw,
                                                          accelerator_template("flexible"))),
                         "no mapping provided for operator FFN2", ValidationError);
}
