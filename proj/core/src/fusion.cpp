#include "samt/fusion.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "samt/errors.hpp"

namespace samt {

namespace {

const std::array<std::vector<OpId>, 6> kPrimitiveOps = {{
    {OpId::QProj, OpId::KProj, OpId::AttnScore},
    {OpId::AttnScore, OpId::Softmax},
    {OpId::Softmax, OpId::AttnOut},
    {OpId::VProj, OpId::AttnOut},
    {OpId::AttnOut, OpId::OutProj},
    {OpId::FFN1, OpId::FFN2},
}};

void check_primitive_id(int id) {
    if (id < 1 || id > 6) throw ValidationError("fusion primitive id must be in [1, 6]");
}

}  // namespace

const std::vector<OpId>& primitive_ops(int id) {
    check_primitive_id(id);
    return kPrimitiveOps[static_cast<std::size_t>(id - 1)];
}

// ============================================================
// Footprint polynomials, in elements, single-head accounting.
// fused   = distinct operands of the merged chain (intermediates elided)
// original= sum of per-operator operands before fusion
// reduced = original - fused  (the intermediates that no longer
//           round-trip through off-chip memory)
// ============================================================

FootprintRecord primitive_footprints(int id, const ModelDims& dims) {
    check_primitive_id(id);
    const std::int64_t d = dims.d;
    const std::int64_t l = dims.l;
    const std::int64_t f = dims.ffn_dim();
    FootprintRecord r;
    switch (id) {
        case 1:  // QProj + KProj + AttnScore
            r.input_fused = 2 * d * d + d * l;          // W_Q, W_K, X
            r.output_fused = l * l;                     // A
            r.input_original = 2 * d * d + 4 * d * l;   // + X twice, Q, K re-read
            r.output_original = l * l + 2 * d * l;      // A plus Q, K written
            break;
        case 2:  // AttnScore + Softmax
            r.input_fused = 2 * d * l;                  // Q, K
            r.output_fused = l * l;                     // S
            r.input_original = l * l + 2 * d * l;
            r.output_original = 2 * l * l;
            break;
        case 3:  // Softmax + AttnOut
            r.input_fused = l * l + d * l;              // A, V
            r.output_fused = d * l;                     // O
            r.input_original = 2 * l * l + d * l;
            r.output_original = l * l + d * l;
            break;
        case 4:  // VProj + AttnOut
            r.input_fused = d * d + l * l + d * l;      // W_V, S, X
            r.output_fused = d * l;                     // O
            r.input_original = d * d + l * l + 2 * d * l;
            r.output_original = 2 * d * l;
            break;
        case 5:  // AttnOut + OutProj
            r.input_fused = d * d + l * l + d * l;      // W_O, S, V
            r.output_fused = d * l;                     // Y
            r.input_original = d * d + l * l + 2 * d * l;
            r.output_original = 2 * d * l;
            break;
        case 6:  // FFN1 + FFN2
            r.input_fused = 2 * f * d + d * l;          // A1, A2, Y
            r.output_fused = d * l;                     // L2
            r.input_original = 2 * f * d + f * l + d * l;
            r.output_original = f * l + d * l;
            break;
        default:
            break;
    }
    r.memory_fused = r.input_fused + r.output_fused;
    r.memory_original = r.input_original + r.output_original;
    r.memory_reduced = r.memory_original - r.memory_fused;
    return r;
}

// ============================================================
// Code codec
// ============================================================

FusionCode FusionCode::parse(const std::string& bits) {
    if (bits.size() != 6)
        throw ValidationError("fusion code must be exactly 6 binary digits, got \"" + bits + "\"");
    FusionCode code;
    for (std::size_t i = 0; i < 6; ++i) {
        if (bits[i] != '0' && bits[i] != '1')
            throw ValidationError("fusion code must be binary, got \"" + bits + "\"");
        code.enabled[i] = bits[i] == '1';
    }
    return code;
}

FusionCode FusionCode::from_value(unsigned value) {
    if (value > 63) throw ValidationError("fusion code value must be in [0, 63]");
    FusionCode code;
    for (std::size_t i = 0; i < 6; ++i) code.enabled[i] = (value >> (5 - i)) & 1u;
    return code;
}

std::string FusionCode::str() const {
    std::string bits(6, '0');
    for (std::size_t i = 0; i < 6; ++i)
        if (enabled[i]) bits[i] = '1';
    return bits;
}

unsigned FusionCode::value() const {
    unsigned v = 0;
    for (std::size_t i = 0; i < 6; ++i)
        if (enabled[i]) v |= 1u << (5 - i);
    return v;
}

bool FusionCode::none() const {
    return std::none_of(enabled.begin(), enabled.end(), [](bool b) { return b; });
}

// ============================================================
// Decode: transitive merge of enabled primitives on shared ops
// ============================================================

ChainSet decode(const FusionCode& code) {
    // Union-find over the six primitives.
    std::array<int, 6> parent;
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
    };
    for (int a = 0; a < 6; ++a) {
        if (!code.enabled[static_cast<std::size_t>(a)]) continue;
        for (int b = a + 1; b < 6; ++b) {
            if (!code.enabled[static_cast<std::size_t>(b)]) continue;
            const auto& oa = kPrimitiveOps[static_cast<std::size_t>(a)];
            const auto& ob = kPrimitiveOps[static_cast<std::size_t>(b)];
            const bool share = std::any_of(oa.begin(), oa.end(), [&](OpId op) {
                return std::find(ob.begin(), ob.end(), op) != ob.end();
            });
            if (share) parent[static_cast<std::size_t>(find(b))] = find(a);
        }
    }

    std::map<int, std::vector<int>> groups;  // root -> primitive ids (1-based)
    for (int p = 0; p < 6; ++p)
        if (code.enabled[static_cast<std::size_t>(p)]) groups[find(p)].push_back(p + 1);

    ChainSet set;
    std::set<OpId> fused_ops;
    for (auto& [root, prims] : groups) {
        FusedChain chain;
        chain.primitives = prims;  // map iteration gives ascending roots; prims ascending
        chain.name = "Op";
        std::set<OpId> ops;
        for (int p : prims) {
            chain.name += static_cast<char>('0' + p);
            for (OpId op : kPrimitiveOps[static_cast<std::size_t>(p - 1)]) ops.insert(op);
        }
        chain.ops.assign(ops.begin(), ops.end());  // OpId order is dependency order
        fused_ops.insert(ops.begin(), ops.end());
        set.chains.push_back(std::move(chain));
    }
    std::sort(set.chains.begin(), set.chains.end(),
              [](const FusedChain& a, const FusedChain& b) { return a.ops.front() < b.ops.front(); });

    for (int i = 0; i < kOpsPerLayer; ++i) {
        const auto op = static_cast<OpId>(i);
        if (!fused_ops.count(op)) set.residual_ops.push_back(op);
    }
    return set;
}

FusionCode encode(const ChainSet& set) {
    FusionCode code;
    for (const auto& chain : set.chains)
        for (int p : chain.primitives) {
            check_primitive_id(p);
            code.enabled[static_cast<std::size_t>(p - 1)] = true;
        }
    return code;
}

std::int64_t chain_memory_reduced(const FusionCode& code, const ModelDims& dims) {
    std::int64_t total = 0;
    for (int p = 1; p <= 6; ++p)
        if (code.enabled[static_cast<std::size_t>(p - 1)])
            total += primitive_footprints(p, dims).memory_reduced;
    return total;
}

// ============================================================
// Physical working set of a fused chain
// ============================================================

ChainTensors chain_tensors(const FusedChain& chain, const std::vector<BaseOp>& ops) {
    auto in_chain = [&](OpId id) {
        return std::find(chain.ops.begin(), chain.ops.end(), id) != chain.ops.end();
    };
    auto find_op = [&](OpId id) -> const BaseOp& {
        for (const auto& op : ops)
            if (op.id == id) return op;
        throw ValidationError("layer is missing operator " + std::string(op_name(id)));
    };

    // A tensor is internal when its producer is in the chain, every
    // consumer is in the chain, and consumers see the producer's full
    // footprint (a decode-mode KV cache is larger than the slice the
    // producer writes, so it still round-trips through memory).
    std::map<TensorName, TensorRef> produced;
    for (OpId id : chain.ops) produced.emplace(find_op(id).output.name, find_op(id).output);

    std::set<TensorName> internal_names;
    for (const auto& [name, ref] : produced) {
        bool internal = true;
        bool consumed = false;
        for (const auto& op : ops) {
            for (const auto& in : op.inputs) {
                if (in.name != name) continue;
                consumed = true;
                if (!in_chain(op.id) || in.footprint_elems() != ref.footprint_elems())
                    internal = false;
            }
        }
        if (consumed && internal) internal_names.insert(name);
    }

    ChainTensors t;
    std::map<TensorName, TensorRef> ext_in;
    for (OpId id : chain.ops) {
        const auto& op = find_op(id);
        for (const auto& in : op.inputs) {
            if (internal_names.count(in.name)) continue;
            auto [it, fresh] = ext_in.emplace(in.name, in);
            if (!fresh && in.rows * in.batch > it->second.rows * it->second.batch)
                it->second = in;  // widest panel wins when shapes differ
        }
    }
    for (const auto& [name, ref] : produced) {
        if (internal_names.count(name))
            t.internal.push_back(ref);
        else
            t.external_out.push_back(ref);
    }
    for (auto& [name, ref] : ext_in) t.external_in.push_back(ref);
    return t;
}

std::int64_t s2_working_set(const FusedChain& chain, const ModelDims& dims) {
    if (chain.ops.size() < 2) return 0;
    const auto layer = build_layer(dims);
    const auto t = chain_tensors(chain, layer);
    const std::int64_t B = dims.bytes_per_element;
    std::int64_t bytes = 0;
    for (const auto& ref : t.internal) bytes += ref.footprint_bytes(B);
    // External operands stream through S2 one column panel at a time.
    for (const auto& ref : t.external_in) bytes += ref.rows * B;
    for (const auto& ref : t.external_out) bytes += ref.rows * B;
    return bytes;
}

FeasibilityResult feasible(const FusionCode& code, const ModelDims& dims, std::int64_t s2_bytes) {
    FeasibilityResult result;
    const auto set = decode(code);
    for (const auto& chain : set.chains) {
        const std::int64_t ws = s2_working_set(chain, dims);
        result.required_bytes = std::max(result.required_bytes, ws);
        if (ws > s2_bytes && result.feasible) {
            result.feasible = false;
            result.limiting_chain = chain.name;
        }
    }
    return result;
}

std::vector<CodeInfo> enumerate_codes(const ModelDims& dims, std::int64_t s2_bytes) {
    std::vector<CodeInfo> out;
    out.reserve(64);
    for (unsigned v = 0; v < 64; ++v) {
        CodeInfo info;
        info.code = FusionCode::from_value(v);
        const auto set = decode(info.code);
        if (set.chains.empty()) {
            info.chains = "-";
        } else {
            for (std::size_t i = 0; i < set.chains.size(); ++i) {
                if (i > 0) info.chains += "+";
                info.chains += set.chains[i].name;
            }
        }
        info.memory_reduced_elems = chain_memory_reduced(info.code, dims);
        info.memory_reduced_bytes = info.memory_reduced_elems * dims.bytes_per_element;
        const auto f = feasible(info.code, dims, s2_bytes);
        info.s2_required_bytes = f.required_bytes;
        info.is_feasible = f.feasible;
        out.push_back(std::move(info));
    }
    return out;
}

}  // namespace samt
