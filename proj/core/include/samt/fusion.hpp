#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "samt/workload.hpp"

namespace samt {

// ============================================================
// Operator fusion over one transformer layer.
//
// Six fusion primitives, each merging a fixed set of base operators:
//   1  QProj + KProj + AttnScore      (saves 5dl elements)
//   2  AttnScore + Softmax            (saves 2l^2)
//   3  Softmax + AttnOut              (saves 2l^2)
//   4  VProj + AttnOut                (saves 2dl)
//   5  AttnOut + OutProj              (saves 2dl)
//   6  FFN1 + FFN2                    (saves 2*d_ffn*l)
//
// A fusion code is a 6-bit string; the leftmost bit is primitive 1.
// Enabled primitives that share a base operator merge transitively
// into one fused chain; e.g. "110110" -> {Op12, Op45} and
// "111111" -> {Op12345, Op6}.
//
// Footprint columns are closed-form polynomials in (d, l, d_ffn),
// in elements, single-head accounting: A and S count as l x l.
// The physical S2 working set of a chain, in contrast, uses the
// full tensor footprints from the workload model (head batch
// included): internal tensors are pinned in S2 at full size, while
// each external operand only needs one streaming panel (one column).
// ============================================================

struct FootprintRecord {
    std::int64_t memory_fused = 0;
    std::int64_t input_fused = 0;
    std::int64_t output_fused = 0;
    std::int64_t memory_original = 0;
    std::int64_t input_original = 0;
    std::int64_t output_original = 0;
    std::int64_t memory_reduced = 0;
};

// Footprints of primitive `id` in [1, 6], in elements.
[[nodiscard]] FootprintRecord primitive_footprints(int id, const ModelDims& dims);

// Base operators merged by primitive `id`.
[[nodiscard]] const std::vector<OpId>& primitive_ops(int id);

struct FusionCode {
    std::array<bool, 6> enabled{};  // enabled[0] is primitive 1

    [[nodiscard]] static FusionCode parse(const std::string& bits);  // throws ValidationError
    [[nodiscard]] static FusionCode from_value(unsigned value);      // 0..63, bit 5 = primitive 1
    [[nodiscard]] std::string str() const;
    [[nodiscard]] unsigned value() const;
    [[nodiscard]] bool none() const;
    bool operator==(const FusionCode&) const = default;
};

struct FusedChain {
    std::string name;                 // "Op" + sorted primitive digits, e.g. "Op45"
    std::vector<int> primitives;      // ascending
    std::vector<OpId> ops;            // dependency order
};

struct ChainSet {
    std::vector<FusedChain> chains;   // ordered by first op
    std::vector<OpId> residual_ops;   // unfused, dependency order
};

[[nodiscard]] ChainSet decode(const FusionCode& code);
// Inverse of decode modulo naming: union of chain primitives.
[[nodiscard]] FusionCode encode(const ChainSet& set);

// Sum of memory_reduced over enabled primitives, in elements.
[[nodiscard]] std::int64_t chain_memory_reduced(const FusionCode& code, const ModelDims& dims);

struct ChainTensors {
    std::vector<TensorRef> internal;      // produced and fully consumed in-chain
    std::vector<TensorRef> external_in;
    std::vector<TensorRef> external_out;
};

[[nodiscard]] ChainTensors chain_tensors(const FusedChain& chain, const std::vector<BaseOp>& ops);

// Peak S2 bytes a fused chain needs: full internal tensors plus one
// column panel per external operand. Zero for single-op chains.
[[nodiscard]] std::int64_t s2_working_set(const FusedChain& chain, const ModelDims& dims);

struct FeasibilityResult {
    bool feasible = true;
    std::string limiting_chain;       // first chain over budget, if any
    std::int64_t required_bytes = 0;  // max working set over chains
};

[[nodiscard]] FeasibilityResult feasible(const FusionCode& code, const ModelDims& dims,
                                         std::int64_t s2_bytes);

struct CodeInfo {
    FusionCode code;
    std::string chains;               // "+"-joined chain names, "-" when none
    std::int64_t memory_reduced_elems = 0;
    std::int64_t memory_reduced_bytes = 0;
    std::int64_t s2_required_bytes = 0;
    bool is_feasible = true;
};

// All 64 codes in ascending binary order.
[[nodiscard]] std::vector<CodeInfo> enumerate_codes(const ModelDims& dims, std::int64_t s2_bytes);

}  // namespace samt
