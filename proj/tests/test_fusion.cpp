#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "samt/errors.hpp"
#include "samt/fusion.hpp"
#include "samt/workload.hpp"

using namespace samt;
using i64 = std::int64_t;

namespace {

ModelDims dims_of(i64 d, i64 l, i64 d_ffn = 0) {
    ModelDims dims;
    dims.d = d;
    dims.l = l;
    dims.n_h = 1;
    dims.d_ffn = d_ffn;
    return dims;
}

}  // namespace

TEST_CASE("footprint identities hold for random shapes") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const i64 d = 1 + static_cast<i64>(rng() % 512);
        const i64 l = 1 + static_cast<i64>(rng() % 512);
        const i64 f = 1 + static_cast<i64>(rng() % 2048);
        const ModelDims dims = dims_of(d, l, f);
        const std::array<i64, 6> reduced = {5 * d * l, 2 * l * l, 2 * l * l,
                                            2 * d * l, 2 * d * l, 2 * f * l};
        for (int id = 1; id <= 6; ++id) {
            const FootprintRecord r = primitive_footprints(id, dims);
            CHECK(r.memory_reduced == r.memory_original - r.memory_fused);
            CHECK(r.memory_fused == r.input_fused + r.output_fused);
            CHECK(r.memory_original == r.input_original + r.output_original);
            CHECK(r.memory_reduced == reduced[static_cast<std::size_t>(id - 1)]);
        }
    }
}

TEST_CASE("frozen footprint values") {
    CHECK(primitive_footprints(1, dims_of(768, 1024)).memory_reduced == 3932160);
    const FootprintRecord p2 = primitive_footprints(2, dims_of(1, 1));
    CHECK(p2.memory_fused == 3);
    CHECK(p2.memory_original == 5);
    CHECK(p2.memory_reduced == 2);
    CHECK_THROWS_AS(static_cast<void>(primitive_footprints(0, dims_of(4, 4))), ValidationError);
    CHECK_THROWS_AS(static_cast<void>(primitive_footprints(7, dims_of(4, 4))), ValidationError);
}

TEST_CASE("primitive operator sets") {
    auto names = [](int id) {
        std::vector<std::string> out;
        for (OpId op : primitive_ops(id)) out.push_back(op_name(op));
        return out;
    };
    CHECK(names(1) == std::vector<std::string>{"QProj", "KProj", "AttnScore"});
    CHECK(names(2) == std::vector<std::string>{"AttnScore", "Softmax"});
    CHECK(names(3) == std::vector<std::string>{"Softmax", "AttnOut"});
    CHECK(names(4) == std::vector<std::string>{"VProj", "AttnOut"});
    CHECK(names(5) == std::vector<std::string>{"AttnOut", "OutProj"});
    CHECK(names(6) == std::vector<std::string>{"FFN1", "FFN2"});
}

TEST_CASE("code parsing") {
    CHECK(FusionCode::parse("110110").value() == 54);
    CHECK(FusionCode::from_value(54).str() == "110110");
    CHECK(FusionCode::parse("000000").none());
    CHECK(FusionCode::parse("100000").enabled[0]);
    CHECK(FusionCode::parse("000001").enabled[5]);
    CHECK_THROWS_AS(static_cast<void>(FusionCode::parse("10110")), ValidationError);
    CHECK_THROWS_AS(static_cast<void>(FusionCode::parse("10201x")), ValidationError);
    CHECK_THROWS_AS(static_cast<void>(FusionCode::parse("")), ValidationError);
}

TEST_CASE("decode merges overlapping primitives") {
    const ChainSet s = decode(FusionCode::parse("110110"));
    REQUIRE(s.chains.size() == 2);
    CHECK(s.chains[0].name == "Op12");
    CHECK(s.chains[0].primitives == std::vector<int>{1, 2});
    CHECK(s.chains[1].name == "Op45");
    CHECK(s.chains[1].primitives == std::vector<int>{4, 5});
    // Op12 covers QProj, KProj, AttnScore, Softmax
    CHECK(s.chains[0].ops.size() == 4);
    // Op45 covers VProj, AttnOut, OutProj
    CHECK(s.chains[1].ops.size() == 3);
    // residual: FFN1, FFN2
    CHECK(s.residual_ops == std::vector<OpId>{OpId::FFN1, OpId::FFN2});

    const ChainSet none = decode(FusionCode::parse("000000"));
    CHECK(none.chains.empty());
    CHECK(none.residual_ops.size() == 9);

    const ChainSet all = decode(FusionCode::parse("111111"));
    REQUIRE(all.chains.size() == 2);
    CHECK(all.chains[0].name == "Op12345");
    CHECK(all.chains[1].name == "Op6");
}

TEST_CASE("all 64 codes decode and re-encode losslessly") {
    for (unsigned v = 0; v < 64; ++v) {
        const FusionCode code = FusionCode::from_value(v);
        const ChainSet s = decode(code);
        CHECK(encode(s) == code);
        // every operator appears exactly once across chains + residual
        std::multiset<OpId> seen(s.residual_ops.begin(), s.residual_ops.end());
        for (const auto& chain : s.chains) seen.insert(chain.ops.begin(), chain.ops.end());
        CHECK(seen.size() == 9);
        CHECK(std::set<OpId>(seen.begin(), seen.end()).size() == 9);
    }
}

TEST_CASE("chain memory reduction is additive") {
    const ModelDims dims = dims_of(768, 1024, 3072);
    CHECK(chain_memory_reduced(FusionCode::parse("000000"), dims) == 0);
    CHECK(chain_memory_reduced(FusionCode::parse("100000"), dims) == 5 * 768 * 1024);
    CHECK(chain_memory_reduced(FusionCode::parse("111111"), dims) == 17563648);
    // sum over singletons equals the full code
    i64 sum = 0;
    for (int bit = 0; bit < 6; ++bit) {
        FusionCode one;
        one.enabled[static_cast<std::size_t>(bit)] = true;
        sum += chain_memory_reduced(one, dims);
    }
    CHECK(sum == 17563648);
}

TEST_CASE("chain tensors distinguish internal from external") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    const auto layer = build_layer(dims);

    const ChainSet p1 = decode(FusionCode::parse("100000"));
    const ChainTensors ct = chain_tensors(p1.chains[0], layer);
    std::set<std::string> internal;
    for (const auto& t : ct.internal) internal.insert(tensor_name(t.name));
    CHECK(internal == std::set<std::string>{"Q", "K"});
    std::set<std::string> ext_in;
    for (const auto& t : ct.external_in) ext_in.insert(tensor_name(t.name));
    CHECK(ext_in == std::set<std::string>{"X", "W_Q", "W_K"});
    std::set<std::string> ext_out;
    for (const auto& t : ct.external_out) ext_out.insert(tensor_name(t.name));
    CHECK(ext_out == std::set<std::string>{"A"});
}

TEST_CASE("decode-phase KV cache breaks internality") {
    ModelDims dims;
    dims.d = 768;
    dims.n_h = 12;
    dims.mode = RunMode::Decode;
    dims.kv_len = 512;
    const auto layer = build_layer(dims);
    const ChainSet p1 = decode(FusionCode::parse("100000"));
    const ChainTensors ct = chain_tensors(p1.chains[0], layer);
    std::set<std::string> internal;
    for (const auto& t : ct.internal) internal.insert(tensor_name(t.name));
    // KProj writes one new column; AttnScore reads the whole cache,
    // so K cannot stay pinned as a chain-internal tensor.
    CHECK(internal.count("K") == 0);
    CHECK(internal.count("Q") == 1);
}

TEST_CASE("working sets at BERT-Base scale") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    const auto layer = build_layer(dims);
    auto ws_of = [&](const char* bits) {
        const ChainSet s = decode(FusionCode::parse(bits));
        REQUIRE(!s.chains.empty());
        return s2_working_set(s.chains[0], dims);
    };

    // Op1 pins Q and K: 2 * 768 * 1024 elements plus streaming panels.
    const i64 op1 = ws_of("100000");
    CHECK(op1 > 2 * 768 * 1024);
    CHECK(op1 < 2 * 768 * 1024 + 64 * 1024);

    // Op2 pins the attention matrix A: 12 MiB exactly, so a 12 MiB S2
    // cannot also hold the streaming panels.
    const i64 op2 = ws_of("010000");
    CHECK(op2 > 12ll * 1024 * 1024);
    CHECK(op2 < 13ll * 1024 * 1024);

    // Op6 pins the FFN intermediate: 3072 * 1024 elements.
    const i64 op6 = ws_of("000001");
    CHECK(op6 > 3072 * 1024);
    CHECK(op6 < 3072 * 1024 + 64 * 1024);

    // Op23 pins both A and S: more than any single primitive.
    const i64 op23 = ws_of("011000");
    CHECK(op23 > 24ll * 1024 * 1024);

    // single-op chains need no pinned working set
    FusedChain solo{"QProj", {}, {OpId::QProj}};
    CHECK(s2_working_set(solo, dims) == 0);
}

TEST_CASE("feasibility reports the limiting chain") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    const FeasibilityResult tight = feasible(FusionCode::parse("010000"), dims, 12ll * 1024 * 1024);
    CHECK(!tight.feasible);
    CHECK(tight.limiting_chain == "Op2");
    CHECK(tight.required_bytes > 12ll * 1024 * 1024);
    const FeasibilityResult roomy = feasible(FusionCode::parse("010000"), dims, 15ll * 1024 * 1024);
    CHECK(roomy.feasible);
    CHECK(feasible(FusionCode::parse("000000"), dims, 1).feasible);  // nothing fused
}

TEST_CASE("code enumeration is complete and ordered") {
    ModelDims dims;
    dims.d = 768;
    dims.l = 1024;
    dims.n_h = 12;
    const auto codes = enumerate_codes(dims, 20ll * 1024 * 1024);
    REQUIRE(codes.size() == 64);
    for (unsigned v = 0; v < 64; ++v) CHECK(codes[v].code.value() == v);
    CHECK(codes[0].chains == "-");
    CHECK(codes[0].memory_reduced_elems == 0);
    CHECK(codes[0].s2_required_bytes == 0);
    CHECK(codes[0].is_feasible);
    CHECK(codes[63].chains == "Op12345+Op6");
    CHECK(codes[63].memory_reduced_bytes ==
          codes[63].memory_reduced_elems * dims.bytes_per_element);
    // feasibility flag matches the standalone check
    for (const auto& info : codes)
        CHECK(info.is_feasible ==
              feasible(info.code, dims, 20ll * 1024 * 1024).feasible);
    // a larger budget can only grow the feasible set
    const auto codes_small = enumerate_codes(dims, 12ll * 1024 * 1024);
    for (unsigned v = 0; v < 64; ++v)
        if (codes_small[v].is_feasible) CHECK(codes[v].is_feasible);
}
