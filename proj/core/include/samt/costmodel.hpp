#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "samt/fusion.hpp"
#include "samt/hardware.hpp"
#include "samt/mapping.hpp"
#include "samt/workload.hpp"

namespace samt {

// ============================================================
// Analytical cost model.
//
// A GEMM runs under a two-level genome: the inter level tiles the
// problem and spreads the spatial dimension's tiles over the
// G = floor(P / cluster_size) clusters in rounds; the intra level
// tiles each cluster tile over the cluster's PEs the same way.
// Execution is lock-step: a step lasts as long as its slowest lane,
// a wave of concurrent clusters as long as its slowest cluster.
//
// Traffic is counted per memory level:
//   acc_s3  off-chip <-> S2. One compulsory transfer per operand
//           plus refetches: a loop over a dimension the operand does
//           not use re-streams it when some inner loop that the
//           operand does use cycles through more than one resident
//           tile (temporal streams keep one tile; a spatial loop
//           keeps one full round-set, so it cycles only when it has
//           more than one round).
//   acc_s2  S2 -> cluster sends, a multicast counted once.
//   acc_s1  per-PE scratchpad fills; forwarding styles move the
//           extra copies neighbor-to-neighbor, which costs one more
//           S1 access per forwarded copy.
//
// latency = max(compute cycles, traffic / bandwidth per cycle),
// energy = MAC work plus per-byte access costs at each level.
// ============================================================

struct TensorCost {
    std::string tensor;
    std::int64_t s3_bytes = 0;
    std::int64_t s2_bytes = 0;
    std::int64_t s1_bytes = 0;
};

struct CostReport {
    std::string op;
    double latency_cycles = 0.0;
    std::int64_t compute_cycles = 0;
    double mem_bound_cycles = 0.0;
    double energy = 0.0;
    std::int64_t acc_s1_bytes = 0;
    std::int64_t acc_s2_bytes = 0;
    std::int64_t acc_s3_bytes = 0;
    std::int64_t mac_count = 0;
    std::int64_t flop_count = 0;
    double pe_utilization = 0.0;
    std::vector<TensorCost> tensors;  // per-operand breakdown, inputs then output
};

// Recompute latency, energy and utilization from the counters.
void refresh_derived(CostReport& report, const HardwareConfig& hw);

// Cost of one (batched) GEMM under a genome. Throws ValidationError
// when the genome is invalid for the operator or has offsets that
// differ from their sizes. Elementwise operators ignore the genome
// and delegate to evaluate_elementwise.
[[nodiscard]] CostReport evaluate_op(const BaseOp& op, const Genome& genome,
                                     const HardwareConfig& hw, const AcceleratorTemplate& tmpl,
                                     std::int64_t bytes_per_element);

// Elementwise operators stream operands once and spread their work
// over all PEs; no genome applies.
[[nodiscard]] CostReport evaluate_elementwise(const BaseOp& op, const HardwareConfig& hw,
                                              std::int64_t bytes_per_element);

using GenomeMap = std::map<OpId, Genome>;

struct ChainReport {
    std::string name;
    std::vector<CostReport> stages;  // aligned with the chain's ops
    CostReport total;
    bool feasible = true;
    std::string message;  // names the tensor driving an S2 overflow
};

// Stages run back to back. Fusing keeps internal tensors in S2
// (their off-chip traffic becomes S2 traffic) and reads a shared
// external input once for all stages that use it.
[[nodiscard]] ChainReport evaluate_chain(const FusedChain& chain,
                                         const std::vector<BaseOp>& layer,
                                         const GenomeMap& genomes, const ModelDims& dims,
                                         const HardwareConfig& hw,
                                         const AcceleratorTemplate& tmpl);

struct LayerReport {
    std::vector<ChainReport> chains;  // fused chains and single-op stages, dependency order
    CostReport total;
    bool feasible = true;
    std::string message;
};

[[nodiscard]] LayerReport evaluate_layer(const FusionCode& code, const GenomeMap& genomes,
                                         const ModelDims& dims, const HardwareConfig& hw,
                                         const AcceleratorTemplate& tmpl);

// GEMM operators in dependency order: the slots a genome vector
// fills (elementwise operators carry no genome).
[[nodiscard]] std::vector<OpId> gemm_stage_ids(const std::vector<BaseOp>& layer);
[[nodiscard]] GenomeMap genome_map_for_layer(const std::vector<BaseOp>& layer,
                                             const std::vector<Genome>& genomes);

}  // namespace samt
