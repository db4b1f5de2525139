#include "samt/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "samt/errors.hpp"

namespace samt {

namespace {

[[nodiscard]] std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Operand roles: 0 = first input (uses M and K), 1 = second input
// (K and N), 2 = output (M and N).
constexpr std::array<Dim, 3> kExcludedDim = {Dim::N, Dim::M, Dim::K};

[[nodiscard]] bool depends_on(int role, Dim d) {
    return d != kExcludedDim[static_cast<std::size_t>(role)];
}

struct LevelInfo {
    std::array<std::int64_t, 3> size{};   // tile size, indexed by Dim
    std::array<std::int64_t, 3> trips{};  // tiles along the dim
    std::array<std::int64_t, 3> rem{};    // extent of the last tile
    std::array<Dim, 3> order{};           // loop order, outermost first
    std::array<MapKind, 3> kind{};        // aligned with order
    Dim sigma = Dim::M;
    std::int64_t lanes = 1;               // parallel lanes of the spatial loop
    std::int64_t rounds = 1;              // ceil(trips[sigma] / lanes)
    std::int64_t last_lanes = 1;          // active lanes in the final round
};

[[nodiscard]] LevelInfo analyze_level(const LevelMap& lm,
                                      const std::array<std::int64_t, 3>& extents,
                                      std::int64_t lanes) {
    LevelInfo info;
    for (std::size_t pos = 0; pos < 3; ++pos) {
        const Directive& dir = lm.directives[pos];
        const auto di = static_cast<std::size_t>(dir.dim);
        info.order[pos] = dir.dim;
        info.kind[pos] = dir.kind;
        info.size[di] = dir.size;
        info.trips[di] = ceil_div(extents[di], dir.size);
        info.rem[di] = extents[di] - (info.trips[di] - 1) * dir.size;
    }
    info.sigma = lm.spatial_dim();
    info.lanes = std::max<std::int64_t>(1, lanes);
    const std::int64_t st = info.trips[static_cast<std::size_t>(info.sigma)];
    info.rounds = ceil_div(st, info.lanes);
    info.last_lanes = st - (info.rounds - 1) * info.lanes;
    return info;
}

// A loop "cycles" when its body streams through more than one
// resident tile: a temporal stream keeps one tile, the spatial loop
// keeps a whole round-set and only cycles across rounds.
[[nodiscard]] bool loop_cycles(const LevelInfo& L, std::size_t pos) {
    if (L.kind[pos] == MapKind::Spatial) return L.rounds > 1;
    return L.trips[static_cast<std::size_t>(L.order[pos])] > 1;
}

[[nodiscard]] std::int64_t loop_trips(const LevelInfo& L, std::size_t pos) {
    if (L.kind[pos] == MapKind::Spatial) return L.rounds;
    return L.trips[static_cast<std::size_t>(L.order[pos])];
}

// Product over loops outside the operand's dimensions whose body
// cycles one of the operand's dimensions: each trip refetches. With
// `temporal_only`, the spatial loop contributes no factor (the intra
// level accounts for it through the multicast multipliers instead).
[[nodiscard]] std::int64_t refetch_factor(const LevelInfo& L, int role, bool temporal_only) {
    std::int64_t f = 1;
    for (std::size_t pos = 0; pos < 3; ++pos) {
        if (depends_on(role, L.order[pos])) continue;
        if (temporal_only && L.kind[pos] == MapKind::Spatial) continue;
        bool inner_dep_cycles = false;
        for (std::size_t q = pos + 1; q < 3; ++q)
            if (depends_on(role, L.order[q]) && loop_cycles(L, q)) inner_dep_cycles = true;
        if (inner_dep_cycles) f *= loop_trips(L, pos);
    }
    return f;
}

struct LaneTraffic {
    std::int64_t sends = 0;  // bytes leaving S2; a multicast counts once
    std::int64_t fills = 0;  // per-PE S1 copies written
};

// Traffic for one operand during one cluster visit of extents e1.
[[nodiscard]] LaneTraffic intra_traffic(const LevelInfo& L0, int role,
                                        const std::array<std::int64_t, 3>& e1) {
    std::int64_t cov = 1;
    for (std::size_t di = 0; di < 3; ++di)
        if (depends_on(role, static_cast<Dim>(di))) cov *= e1[di];
    const std::int64_t f0 = refetch_factor(L0, role, /*temporal_only=*/true);
    LaneTraffic t;
    if (depends_on(role, L0.sigma)) {
        // Lanes hold disjoint slices: every send lands in one S1.
        t.sends = t.fills = cov * f0;
        return t;
    }
    // All lanes need the same tiles: one multicast serves a round.
    // If some inner loop cycles the operand, each round re-streams
    // it and every lane slot refills; otherwise it is fetched once
    // and stays pinned in the active lanes.
    std::size_t spos = 0;
    for (std::size_t pos = 0; pos < 3; ++pos)
        if (L0.kind[pos] == MapKind::Spatial) spos = pos;
    bool inner_cycling = false;
    for (std::size_t q = spos + 1; q < 3; ++q)
        if (depends_on(role, L0.order[q]) && loop_cycles(L0, q)) inner_cycling = true;
    const std::int64_t sigma_trips = L0.trips[static_cast<std::size_t>(L0.sigma)];
    const std::int64_t s2_mult = inner_cycling ? L0.rounds : 1;
    const std::int64_t s1_mult = inner_cycling ? sigma_trips : std::min(L0.lanes, sigma_trips);
    t.sends = cov * f0 * s2_mult;
    t.fills = cov * f0 * s1_mult;
    return t;
}

// Lock-step cycles of one cluster visit: each step lasts as long as
// its largest lane tile, so a round contributes the full spatial
// tile size unless only the remainder lane is active.
[[nodiscard]] std::int64_t visit_cycles(const LevelMap& intra,
                                        const std::array<std::int64_t, 3>& e1,
                                        std::int64_t cluster_pes) {
    const LevelInfo L0 = analyze_level(intra, e1, cluster_pes);
    const auto sd = static_cast<std::size_t>(L0.sigma);
    const std::int64_t tail = L0.last_lanes >= 2 ? L0.size[sd] : L0.rem[sd];
    std::int64_t cycles = (L0.rounds - 1) * L0.size[sd] + tail;
    for (std::size_t di = 0; di < 3; ++di)
        if (static_cast<Dim>(di) != L0.sigma) cycles *= e1[di];
    return cycles;
}

// Tile extent classes along one dim: (extent, tiles with it).
using DimClasses = std::vector<std::pair<std::int64_t, std::int64_t>>;

[[nodiscard]] DimClasses dim_classes(const LevelInfo& L, Dim d) {
    const auto di = static_cast<std::size_t>(d);
    if (L.trips[di] == 1 || L.rem[di] == L.size[di]) return {{L.rem[di], L.trips[di]}};
    return {{L.size[di], L.trips[di] - 1}, {L.rem[di], 1}};
}

}  // namespace

void refresh_derived(CostReport& r, const HardwareConfig& hw) {
    r.mem_bound_cycles =
        std::max(static_cast<double>(r.acc_s3_bytes) / hw.offchip_bytes_per_cycle(),
                 static_cast<double>(r.acc_s2_bytes) / hw.noc_bytes_per_cycle());
    r.latency_cycles = std::max(static_cast<double>(r.compute_cycles), r.mem_bound_cycles);
    const std::int64_t extra = r.flop_count - 2 * r.mac_count;
    const auto& e = hw.energy;
    r.energy = static_cast<double>(r.mac_count + extra) * e.e_mac +
               static_cast<double>(r.acc_s1_bytes) * e.e_s1 +
               static_cast<double>(r.acc_s2_bytes) * e.e_s2 +
               static_cast<double>(r.acc_s3_bytes) * e.e_s3;
    r.pe_utilization =
        r.compute_cycles > 0
            ? static_cast<double>(r.mac_count) /
                  (static_cast<double>(r.compute_cycles) * static_cast<double>(hw.pe_count))
            : 0.0;
}

CostReport evaluate_op(const BaseOp& op, const Genome& genome, const HardwareConfig& hw,
                       const AcceleratorTemplate& tmpl, std::int64_t bytes_per_element) {
    if (op.kind == OpKind::Elementwise) return evaluate_elementwise(op, hw, bytes_per_element);
    hw.ensure_valid();
    for (const auto* level : {&genome.inter, &genome.intra})
        for (const auto& dir : level->directives)
            if (dir.offset != dir.size)
                throw ValidationError(
                    "cost evaluation requires offset == size for every directive");
    ensure_valid_genome(genome, GemmShape::of(op, bytes_per_element), hw, tmpl);

    std::array<std::int64_t, 3> extents{};
    extents[static_cast<std::size_t>(Dim::M)] = op.m;
    extents[static_cast<std::size_t>(Dim::N)] = op.n;
    extents[static_cast<std::size_t>(Dim::K)] = op.k;
    const std::int64_t clusters = std::max<std::int64_t>(1, hw.pe_count / genome.cluster_size);
    const LevelInfo L1 = analyze_level(genome.inter, extents, clusters);
    const std::int64_t b = op.batch;

    CostReport r;
    r.op = op_name(op.id);
    r.mac_count = op.mac_count();
    r.flop_count = op.flops();

    std::array<std::int64_t, 3> s3_elems{}, s2_elems{}, s1_elems{};

    // Off-chip traffic: compulsory footprint times refetch factor.
    for (int role = 0; role < 3; ++role) {
        std::int64_t footprint = 1;
        for (std::size_t di = 0; di < 3; ++di)
            if (depends_on(role, static_cast<Dim>(di))) footprint *= extents[di];
        s3_elems[static_cast<std::size_t>(role)] =
            b * footprint * refetch_factor(L1, role, /*temporal_only=*/false);
    }

    // NoC traffic: every cluster visit is one of at most eight tile
    // extent classes; sum class traffic weighted by visit counts.
    for (const auto& [em, cm] : dim_classes(L1, Dim::M))
        for (const auto& [en, cn] : dim_classes(L1, Dim::N))
            for (const auto& [ek, ck] : dim_classes(L1, Dim::K)) {
                std::array<std::int64_t, 3> e1{};
                e1[static_cast<std::size_t>(Dim::M)] = em;
                e1[static_cast<std::size_t>(Dim::N)] = en;
                e1[static_cast<std::size_t>(Dim::K)] = ek;
                const std::int64_t visits = cm * cn * ck;
                const LevelInfo L0 = analyze_level(genome.intra, e1, genome.cluster_size);
                for (int role = 0; role < 3; ++role) {
                    const LaneTraffic t = intra_traffic(L0, role, e1);
                    std::int64_t fills = t.fills;
                    if (tmpl.forwarding) fills += t.fills - t.sends;
                    s2_elems[static_cast<std::size_t>(role)] += b * visits * t.sends;
                    s1_elems[static_cast<std::size_t>(role)] += b * visits * fills;
                }
            }

    // Compute: waves of concurrent clusters run in lock-step; a wave
    // lasts as long as the largest concurrent visit. Temporal dims
    // pick the wave's tile class; spatial rounds use the full tile
    // unless only the remainder lane is left.
    std::vector<Dim> tdims;
    for (std::size_t pos = 0; pos < 3; ++pos)
        if (L1.kind[pos] == MapKind::Temporal) tdims.push_back(L1.order[pos]);
    const auto sd1 = static_cast<std::size_t>(L1.sigma);
    const std::int64_t tail_rounds = L1.last_lanes == 1 ? 1 : 0;
    const std::int64_t full_rounds = L1.rounds - tail_rounds;
    std::int64_t cc = 0;
    for (const auto& [ea, ca] : dim_classes(L1, tdims[0]))
        for (const auto& [eb, cb] : dim_classes(L1, tdims[1])) {
            std::array<std::int64_t, 3> e1{};
            e1[static_cast<std::size_t>(tdims[0])] = ea;
            e1[static_cast<std::size_t>(tdims[1])] = eb;
            const std::int64_t waves = ca * cb;
            if (full_rounds > 0) {
                e1[sd1] = L1.size[sd1];
                cc += waves * full_rounds * visit_cycles(genome.intra, e1, genome.cluster_size);
            }
            if (tail_rounds > 0) {
                e1[sd1] = L1.rem[sd1];
                cc += waves * tail_rounds * visit_cycles(genome.intra, e1, genome.cluster_size);
            }
        }
    r.compute_cycles = b * cc + ceil_div(op.extra_flops, hw.pe_count);

    const std::array<std::string, 3> names = {tensor_name(op.inputs.at(0).name),
                                              tensor_name(op.inputs.at(1).name),
                                              tensor_name(op.output.name)};
    const std::int64_t B = bytes_per_element;
    for (int role = 0; role < 3; ++role) {
        const auto ri = static_cast<std::size_t>(role);
        TensorCost tc;
        tc.tensor = names[ri];
        tc.s3_bytes = s3_elems[ri] * B;
        tc.s2_bytes = s2_elems[ri] * B;
        tc.s1_bytes = s1_elems[ri] * B;
        r.acc_s3_bytes += tc.s3_bytes;
        r.acc_s2_bytes += tc.s2_bytes;
        r.acc_s1_bytes += tc.s1_bytes;
        r.tensors.push_back(std::move(tc));
    }
    refresh_derived(r, hw);
    return r;
}

CostReport evaluate_elementwise(const BaseOp& op, const HardwareConfig& hw,
                                std::int64_t bytes_per_element) {
    hw.ensure_valid();
    CostReport r;
    r.op = op_name(op.id);
    r.mac_count = 0;
    r.flop_count = op.flops();
    r.compute_cycles = ceil_div(op.flops(), hw.pe_count);
    for (const auto& in : op.inputs) {
        const std::int64_t bytes = in.footprint_bytes(bytes_per_element);
        r.tensors.push_back(TensorCost{tensor_name(in.name), bytes, bytes, bytes});
    }
    const std::int64_t out_bytes = op.output.footprint_bytes(bytes_per_element);
    r.tensors.push_back(TensorCost{tensor_name(op.output.name), out_bytes, out_bytes, out_bytes});
    for (const auto& tc : r.tensors) {
        r.acc_s3_bytes += tc.s3_bytes;
        r.acc_s2_bytes += tc.s2_bytes;
        r.acc_s1_bytes += tc.s1_bytes;
    }
    refresh_derived(r, hw);
    return r;
}

namespace {

[[nodiscard]] const BaseOp& find_op(const std::vector<BaseOp>& layer, OpId id) {
    for (const auto& op : layer)
        if (op.id == id) return op;
    throw ValidationError("layer is missing operator " + std::string(op_name(id)));
}

void rebuild_totals(CostReport& stage, const HardwareConfig& hw) {
    stage.acc_s1_bytes = stage.acc_s2_bytes = stage.acc_s3_bytes = 0;
    for (const auto& tc : stage.tensors) {
        stage.acc_s1_bytes += tc.s1_bytes;
        stage.acc_s2_bytes += tc.s2_bytes;
        stage.acc_s3_bytes += tc.s3_bytes;
    }
    refresh_derived(stage, hw);
}

void accumulate(CostReport& total, const CostReport& part, const HardwareConfig& hw) {
    total.latency_cycles += part.latency_cycles;
    total.compute_cycles += part.compute_cycles;
    total.mem_bound_cycles += part.mem_bound_cycles;
    total.energy += part.energy;
    total.acc_s1_bytes += part.acc_s1_bytes;
    total.acc_s2_bytes += part.acc_s2_bytes;
    total.acc_s3_bytes += part.acc_s3_bytes;
    total.mac_count += part.mac_count;
    total.flop_count += part.flop_count;
    total.pe_utilization =
        total.compute_cycles > 0
            ? static_cast<double>(total.mac_count) /
                  (static_cast<double>(total.compute_cycles) * static_cast<double>(hw.pe_count))
            : 0.0;
}

}  // namespace

ChainReport evaluate_chain(const FusedChain& chain, const std::vector<BaseOp>& layer,
                           const GenomeMap& genomes, const ModelDims& dims,
                           const HardwareConfig& hw, const AcceleratorTemplate& tmpl) {
    ChainReport cr;
    cr.name = chain.name;
    for (OpId id : chain.ops) {
        const BaseOp& op = find_op(layer, id);
        if (op.kind == OpKind::Elementwise) {
            cr.stages.push_back(evaluate_elementwise(op, hw, dims.bytes_per_element));
        } else {
            const auto it = genomes.find(id);
            if (it == genomes.end())
                throw ValidationError(std::string("no mapping provided for operator ") +
                                      op_name(id));
            cr.stages.push_back(
                evaluate_op(op, it->second, hw, tmpl, dims.bytes_per_element));
        }
    }

    if (chain.ops.size() >= 2) {
        const ChainTensors ct = chain_tensors(chain, layer);

        // Internal tensors stay resident in S2: what would have gone
        // off-chip is served by S2 instead.
        for (const auto& ref : ct.internal) {
            const std::string name = tensor_name(ref.name);
            for (auto& stage : cr.stages)
                for (auto& tc : stage.tensors)
                    if (tc.tensor == name && tc.s3_bytes > 0) {
                        tc.s2_bytes += tc.s3_bytes;
                        tc.s3_bytes = 0;
                    }
        }

        // A shared external input is read from off-chip once for the
        // whole chain: keep the largest stage's stream, drop the rest.
        for (const auto& ref : ct.external_in) {
            const std::string name = tensor_name(ref.name);
            std::vector<TensorCost*> uses;
            for (auto& stage : cr.stages)
                for (std::size_t i = 0; i + 1 < stage.tensors.size(); ++i)
                    if (stage.tensors[i].tensor == name) uses.push_back(&stage.tensors[i]);
            if (uses.size() < 2) continue;
            TensorCost* keep = uses.front();
            for (TensorCost* u : uses)
                if (u->s3_bytes > keep->s3_bytes) keep = u;
            for (TensorCost* u : uses)
                if (u != keep) u->s3_bytes = 0;
        }

        for (auto& stage : cr.stages) rebuild_totals(stage, hw);

        const std::int64_t ws = s2_working_set(chain, dims);
        cr.total.op = chain.name;
        if (ws > hw.s2_bytes) {
            cr.feasible = false;
            const TensorRef* largest = nullptr;
            for (const auto& ref : ct.internal)
                if (!largest ||
                    ref.footprint_bytes(dims.bytes_per_element) >
                        largest->footprint_bytes(dims.bytes_per_element))
                    largest = &ref;
            cr.message = "chain " + chain.name + " needs " + std::to_string(ws) +
                         " bytes of S2 but only " + std::to_string(hw.s2_bytes) +
                         " are available" +
                         (largest ? std::string("; largest resident tensor is ") +
                                        tensor_name(largest->name)
                                  : std::string());
        }
    }

    cr.total.op = chain.name;
    for (const auto& stage : cr.stages) accumulate(cr.total, stage, hw);
    return cr;
}

LayerReport evaluate_layer(const FusionCode& code, const GenomeMap& genomes,
                           const ModelDims& dims, const HardwareConfig& hw,
                           const AcceleratorTemplate& tmpl) {
    const auto layer = build_layer(dims);
    ChainSet set = decode(code);
    std::vector<FusedChain> units = set.chains;
    for (OpId id : set.residual_ops)
        units.push_back(FusedChain{op_name(id), {}, {id}});
    std::sort(units.begin(), units.end(),
              [](const FusedChain& a, const FusedChain& b) { return a.ops.front() < b.ops.front(); });

    LayerReport lr;
    lr.total.op = code.str();
    for (const auto& unit : units) {
        ChainReport cr = evaluate_chain(unit, layer, genomes, dims, hw, tmpl);
        if (!cr.feasible && lr.feasible) {
            lr.feasible = false;
            lr.message = cr.message;
        }
        accumulate(lr.total, cr.total, hw);
        lr.chains.push_back(std::move(cr));
    }
    return lr;
}

std::vector<OpId> gemm_stage_ids(const std::vector<BaseOp>& layer) {
    std::vector<OpId> ids;
    for (const auto& op : layer)
        if (op.kind != OpKind::Elementwise) ids.push_back(op.id);
    return ids;
}

GenomeMap genome_map_for_layer(const std::vector<BaseOp>& layer,
                               const std::vector<Genome>& genomes) {
    const auto ids = gemm_stage_ids(layer);
    if (genomes.size() != ids.size())
        throw ValidationError("expected " + std::to_string(ids.size()) +
                              " genomes (one per GEMM operator), got " +
                              std::to_string(genomes.size()));
    GenomeMap map;
    for (std::size_t i = 0; i < ids.size(); ++i) map.emplace(ids[i], genomes[i]);
    return map;
}

}  // namespace samt
