#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samt/costmodel.hpp"
#include "samt/fusion.hpp"
#include "samt/hardware.hpp"
#include "samt/mapping.hpp"
#include "samt/workload.hpp"

namespace samt {

// ============================================================
// Mapping search: a genetic algorithm over genomes, one per GEMM
// stage, plus an exhaustive oracle for small spaces, plus the outer
// loop over all 64 fusion codes.
//
// Fitness is lexicographic: latency first, energy to break latency
// ties. Candidate scans use a relative band on latency so that a
// sliver of latency never outweighs a real energy win; sorting uses
// the exact order with the genome text as the final tie-break so
// results are reproducible for a fixed seed.
// ============================================================

struct GaConfig {
    int population_size = 48;
    int generations = 32;
    double crossover_rate = 0.6;
    double mutation_rate = 0.3;
    double reorder_rate = 0.1;
    double elite_fraction = 0.05;
    double fitness_threshold = 0.5;  // fitness quantile a child must beat to enter
    std::uint64_t seed = 0;

    [[nodiscard]] std::vector<std::string> validate() const;
    void ensure_valid() const;  // throws ValidationError
};

struct Fitness {
    double latency = 0.0;
    double energy = 0.0;
};

// Exact lexicographic order on (latency, energy).
[[nodiscard]] bool strictly_better(const Fitness& a, const Fitness& b);
// Banded order: latencies within `band` of each other tie and energy
// decides; exact ties keep the incumbent (return false).
[[nodiscard]] bool banded_better(const Fitness& a, const Fitness& b, double band = 1e-3);

// How genomes relate across the GEMM stages of a layer: one shared
// dataflow structure (sizes still per-stage), or a free structure
// per operator. Fixed accelerator templates only support the former;
// the flexible template is searched both ways.
enum class DataflowMode { Fixed, Flexible };
[[nodiscard]] const char* dataflow_mode_name(DataflowMode mode);
[[nodiscard]] std::vector<DataflowMode> dataflow_modes(const AcceleratorTemplate& tmpl);

struct TracePoint {
    int generation = 0;
    double best_latency = 0.0;
    double best_energy = 0.0;
};

struct GemmSearchResult {
    Genome best;
    Fitness fitness;
    std::vector<TracePoint> trace;
};

// GA over mappings of a single GEMM operator.
[[nodiscard]] GemmSearchResult ga_search_gemm(const BaseOp& op, std::int64_t bytes_per_element,
                                              const HardwareConfig& hw,
                                              const AcceleratorTemplate& tmpl,
                                              const GaConfig& cfg);

struct OracleResult {
    Genome best;
    Fitness fitness;
    unsigned long long evaluated = 0;
};

// Every genome in the search menus, evaluated. Throws
// ValidationError when the space exceeds `cap` genomes.
[[nodiscard]] OracleResult exhaustive_search_gemm(const BaseOp& op,
                                                  std::int64_t bytes_per_element,
                                                  const HardwareConfig& hw,
                                                  const AcceleratorTemplate& tmpl,
                                                  unsigned long long cap = 1000000);

struct CodeSearchResult {
    FusionCode code;
    DataflowMode mode = DataflowMode::Fixed;
    bool feasible = true;
    std::string message;          // why the code was skipped, when infeasible
    std::vector<Genome> genomes;  // best mapping per GEMM stage
    Fitness fitness;
    std::int64_t s2_required_bytes = 0;
    std::int64_t memory_reduced_bytes = 0;
    std::vector<TracePoint> trace;
};

// GA over the whole layer under one fusion code. Infeasible codes
// come back unsearched with feasible == false.
[[nodiscard]] CodeSearchResult ga_search_code(const FusionCode& code, DataflowMode mode,
                                              const ModelDims& dims, const HardwareConfig& hw,
                                              const AcceleratorTemplate& tmpl,
                                              const GaConfig& cfg);

struct FullSearchResult {
    std::vector<CodeSearchResult> entries;  // code-ascending, modes inner
    std::vector<std::size_t> pareto;        // non-dominated feasible entries
    std::size_t best_index = 0;             // overall winner among feasible entries

    [[nodiscard]] const CodeSearchResult& best() const { return entries.at(best_index); }
};

// All 64 fusion codes x the template's dataflow modes. Each task has
// its own seeded generator, so results do not depend on `threads`.
// Throws FeasibilityError when no code yields a feasible result.
[[nodiscard]] FullSearchResult full_search(const ModelDims& dims, const HardwareConfig& hw,
                                           const AcceleratorTemplate& tmpl, const GaConfig& cfg,
                                           int threads = 1);

}  // namespace samt
