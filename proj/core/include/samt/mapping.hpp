#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "samt/hardware.hpp"
#include "samt/workload.hpp"

namespace samt {

// ============================================================
// Two-level loop-nest mappings ("genomes") for a GEMM on a
// clustered accelerator.
//
// The outer (inter-cluster) level tiles the full problem and
// distributes one dimension spatially over clusters; the inner
// (intra-cluster) level tiles each cluster's tile and distributes
// one dimension over the cluster's PEs. Each level holds exactly
// three directives, one per GEMM dimension {M, N, K}, exactly one
// of them spatial. Directive order is loop order, outermost first.
//
// Text form, one level per line with the cluster split between:
//   TemporalMap(4,4) K; TemporalMap(2,2) N; SpatialMap(16,16) M;
//   Cluster(16);
//   TemporalMap(1,1) M; TemporalMap(1,1) K; SpatialMap(8,8) N;
// Parsing then printing reproduces the canonical text exactly.
// ============================================================

enum class Dim { M, N, K };
enum class MapKind { Temporal, Spatial };

[[nodiscard]] const char* dim_name(Dim d);

struct GemmShape {
    std::int64_t m = 1;
    std::int64_t n = 1;
    std::int64_t k = 1;
    std::int64_t batch = 1;
    std::int64_t bytes_per_element = 1;

    [[nodiscard]] static GemmShape of(const BaseOp& op, std::int64_t bytes_per_element);
    [[nodiscard]] std::int64_t extent(Dim d) const;
    bool operator==(const GemmShape&) const = default;
};

struct Directive {
    MapKind kind = MapKind::Temporal;
    Dim dim = Dim::M;
    std::int64_t size = 1;    // tile extent along dim
    std::int64_t offset = 1;  // step between consecutive tiles

    bool operator==(const Directive&) const = default;
};

struct LevelMap {
    std::array<Directive, 3> directives{};

    [[nodiscard]] const Directive& at(Dim d) const;  // throws ValidationError if absent
    [[nodiscard]] std::int64_t size_of(Dim d) const { return at(d).size; }
    [[nodiscard]] Dim spatial_dim() const;           // throws ValidationError if absent
    bool operator==(const LevelMap&) const = default;
};

struct Genome {
    LevelMap inter;                 // cluster-level loops (outer)
    std::int64_t cluster_size = 1;  // PEs per cluster
    LevelMap intra;                 // PE-level loops (inner)

    [[nodiscard]] std::string str() const;
    [[nodiscard]] static Genome parse(const std::string& text);  // throws ValidationError
    bool operator==(const Genome&) const = default;
};

// ============================================================
// Accelerator templates: fixed dataflow styles plus "flexible".
// A fixed structure pins directive kinds and dimension order at a
// level; tile sizes stay free. cluster_size 0 means free.
// ============================================================

struct SlotSpec {
    MapKind kind = MapKind::Temporal;
    Dim dim = Dim::M;
    bool operator==(const SlotSpec&) const = default;
};

struct AcceleratorTemplate {
    std::string name;
    bool per_operator_dataflow = false;      // may pick a different dataflow per operator
    bool supports_spatial_reduction = true;  // K may map spatially
    bool forwarding = false;                 // operand fills forwarded between neighbor PEs
    std::int64_t cluster_size = 0;
    std::optional<std::array<SlotSpec, 3>> inter_structure;
    std::optional<std::array<SlotSpec, 3>> intra_structure;
};

// Registry: shidiannao, nvdla, eyeriss, tpu, flexible.
[[nodiscard]] const AcceleratorTemplate& accelerator_template(const std::string& name);
[[nodiscard]] std::vector<std::string> template_names();

// ============================================================
// Validation and construction
// ============================================================

// One message per violation; empty means valid.
[[nodiscard]] std::vector<std::string> validate_genome(const Genome& g, const GemmShape& gemm,
                                                       const HardwareConfig& hw,
                                                       const AcceleratorTemplate& tmpl);
// Throws ValidationError with all violations joined.
void ensure_valid_genome(const Genome& g, const GemmShape& gemm, const HardwareConfig& hw,
                         const AcceleratorTemplate& tmpl);

// Deterministic valid genome: maximal divisor tiles shrunk until the
// S1/S2 budgets fit, then the spatial tiles shrunk until the lanes
// are covered. Throws FeasibilityError when even unit tiles overflow.
[[nodiscard]] Genome default_genome(const AcceleratorTemplate& tmpl, const GemmShape& gemm,
                                    const HardwareConfig& hw);

// Random valid genome drawn from the same menus the search uses.
[[nodiscard]] Genome random_genome(const AcceleratorTemplate& tmpl, const GemmShape& gemm,
                                   const HardwareConfig& hw, std::mt19937_64& rng);

// Clamp tile sizes until the genome fits its budgets again, keeping
// the structure: intra sizes capped by inter sizes, then each level
// shrunk to its byte budget. Offsets follow sizes. Throws
// FeasibilityError when even unit tiles overflow.
[[nodiscard]] Genome repair_genome(Genome g, const GemmShape& gemm, const HardwareConfig& hw);

// Overwrite a directive's tile size (and offset) by dimension.
void set_directive_size(LevelMap& level, Dim d, std::int64_t size);

// Ascending divisors of n.
[[nodiscard]] std::vector<std::int64_t> divisors(std::int64_t n);

struct MappingSpaceCount {
    unsigned long long count = 0;
    double log10_count = 0.0;
};

// Number of genomes reachable from the search menus: tile sizes are
// divisors of the dimension with intra <= inter, cluster sizes divide
// the PE count, structures as the template allows. Scratchpad budgets
// do not shrink the menu; they only decide which genomes validate.
// On overflow the count saturates and log10_count carries the size.
[[nodiscard]] MappingSpaceCount count_mapping_space(const AcceleratorTemplate& tmpl,
                                                    const GemmShape& gemm,
                                                    const HardwareConfig& hw);

}  // namespace samt
