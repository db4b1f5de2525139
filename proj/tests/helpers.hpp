#pragma once

#include <cstdint>

#include "samt/hardware.hpp"
#include "samt/mapping.hpp"
#include "samt/workload.hpp"

namespace testutil {

// A bare GEMM carrier for mapping/cost tests; tensor names are
// arbitrary, shapes are what matters.
inline samt::BaseOp make_gemm(std::int64_t m, std::int64_t n, std::int64_t k,
                              std::int64_t batch = 1) {
    samt::BaseOp op;
    op.id = samt::OpId::QProj;
    op.kind = batch > 1 ? samt::OpKind::BatchedGemm : samt::OpKind::Gemm;
    op.m = m;
    op.n = n;
    op.k = k;
    op.batch = batch;
    op.inputs = {samt::TensorRef{samt::TensorName::W_Q, m, k, batch, batch > 1},
                 samt::TensorRef{samt::TensorName::X, k, n, batch, batch > 1}};
    op.output = samt::TensorRef{samt::TensorName::Q, m, n, batch, batch > 1};
    return op;
}

// Hardware with buffers so large no footprint check interferes.
inline samt::HardwareConfig roomy_hw(std::int64_t pe_count) {
    samt::HardwareConfig hw;
    hw.pe_count = pe_count;
    hw.s1_bytes = 1ll << 30;
    hw.s2_bytes = 1ll << 40;
    return hw;
}

// One inter tile covering the whole problem and unit PE tiles: every
// operand streams off-chip exactly once, so acc_s3 equals the summed
// operand footprints.
inline samt::Genome single_tile_genome(std::int64_t m, std::int64_t n, std::int64_t k) {
    using namespace samt;
    Genome g;
    g.inter.directives = {Directive{MapKind::Temporal, Dim::K, k, k},
                          Directive{MapKind::Temporal, Dim::N, n, n},
                          Directive{MapKind::Spatial, Dim::M, m, m}};
    g.cluster_size = 1;
    g.intra.directives = {Directive{MapKind::Temporal, Dim::M, 1, 1},
                          Directive{MapKind::Temporal, Dim::K, 1, 1},
                          Directive{MapKind::Spatial, Dim::N, 1, 1}};
    return g;
}

}  // namespace testutil
