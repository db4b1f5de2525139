#include "samt/workload.hpp"

#include <numeric>
#include <sstream>
#include <unordered_set>

#include "samt/errors.hpp"

namespace samt {

std::vector<std::string> ModelDims::validate() const {
    std::vector<std::string> out;
    if (d <= 0) out.push_back("d: must be positive");
    if (l <= 0) out.push_back("l: must be positive");
    if (n_h <= 0) out.push_back("n_h: must be positive");
    if (n_h > 0 && d > 0 && d % n_h != 0) out.push_back("n_h: must divide d");
    if (d_ffn < 0) out.push_back("d_ffn: must be non-negative (0 selects 4*d)");
    if (bytes_per_element <= 0) out.push_back("bytes_per_element: must be positive");
    if (mode == RunMode::Decode && kv_len <= 0) out.push_back("kv_len: must be positive in decode mode");
    if (c_sm <= 0) out.push_back("c_sm: must be positive");
    if (c_gelu <= 0) out.push_back("c_gelu: must be positive");
    return out;
}

void ModelDims::ensure_valid() const {
    auto violations = validate();
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid model dims:";
    for (const auto& v : violations) msg << " [" << v << "]";
    throw ValidationError(msg.str());
}

std::int64_t BaseOp::mops(std::int64_t bytes_per_element) const {
    std::int64_t elems = output.footprint_elems();
    for (const auto& in : inputs) elems += in.footprint_elems();
    return elems * bytes_per_element;
}

const char* op_name(OpId id) {
    switch (id) {
        case OpId::QProj: return "QProj";
        case OpId::KProj: return "KProj";
        case OpId::VProj: return "VProj";
        case OpId::AttnScore: return "AttnScore";
        case OpId::Softmax: return "Softmax";
        case OpId::AttnOut: return "AttnOut";
        case OpId::OutProj: return "OutProj";
        case OpId::FFN1: return "FFN1";
        case OpId::FFN2: return "FFN2";
    }
    return "?";
}

const char* tensor_name(TensorName name) {
    switch (name) {
        case TensorName::X: return "X";
        case TensorName::W_Q: return "W_Q";
        case TensorName::W_K: return "W_K";
        case TensorName::W_V: return "W_V";
        case TensorName::W_O: return "W_O";
        case TensorName::Q: return "Q";
        case TensorName::K: return "K";
        case TensorName::V: return "V";
        case TensorName::A: return "A";
        case TensorName::S: return "S";
        case TensorName::O: return "O";
        case TensorName::Y: return "Y";
        case TensorName::A1: return "A1";
        case TensorName::B1: return "B1";
        case TensorName::A2: return "A2";
        case TensorName::B2: return "B2";
        case TensorName::L1: return "L1";
        case TensorName::L2: return "L2";
    }
    return "?";
}

namespace {

TensorRef full(TensorName name, std::int64_t rows, std::int64_t cols) {
    return TensorRef{name, rows, cols, 1, false};
}

TensorRef per_head(TensorName name, std::int64_t rows, std::int64_t cols, std::int64_t heads) {
    return TensorRef{name, rows, cols, heads, true};
}

BaseOp projection(OpId id, TensorName weight, TensorName in, TensorName out,
                  std::int64_t d, std::int64_t l_q) {
    BaseOp op;
    op.id = id;
    op.kind = OpKind::Gemm;
    op.m = d;
    op.n = l_q;
    op.k = d;
    op.inputs = {full(weight, d, d), full(in, d, l_q)};
    op.output = full(out, d, l_q);
    return op;
}

}  // namespace

std::vector<BaseOp> build_layer(const ModelDims& dims) {
    dims.ensure_valid();
    const std::int64_t d = dims.d;
    const std::int64_t l_q = dims.query_len();
    const std::int64_t l_kv = dims.key_len();
    const std::int64_t d_h = dims.head_dim();
    const std::int64_t n_h = dims.n_h;
    const std::int64_t d_ffn = dims.ffn_dim();

    std::vector<BaseOp> ops;
    ops.reserve(9);

    ops.push_back(projection(OpId::QProj, TensorName::W_Q, TensorName::X, TensorName::Q, d, l_q));
    ops.push_back(projection(OpId::KProj, TensorName::W_K, TensorName::X, TensorName::K, d, l_q));
    ops.push_back(projection(OpId::VProj, TensorName::W_V, TensorName::X, TensorName::V, d, l_q));

    // A = Q^T ⊗ K per head. In decode the K operand is the KV cache
    // (l_kv = kv_len columns), not KProj's single-token output.
    {
        BaseOp op;
        op.id = OpId::AttnScore;
        op.kind = OpKind::BatchedGemm;
        op.m = l_q;
        op.n = l_kv;
        op.k = d_h;
        op.batch = n_h;
        op.inputs = {per_head(TensorName::Q, d_h, l_q, n_h), per_head(TensorName::K, d_h, l_kv, n_h)};
        op.output = per_head(TensorName::A, l_q, l_kv, n_h);
        ops.push_back(op);
    }

    {
        BaseOp op;
        op.id = OpId::Softmax;
        op.kind = OpKind::Elementwise;
        op.m = l_q;
        op.n = l_kv;
        op.k = 1;
        op.batch = n_h;
        op.inputs = {per_head(TensorName::A, l_q, l_kv, n_h)};
        op.output = per_head(TensorName::S, l_q, l_kv, n_h);
        op.extra_flops = dims.c_sm * l_q * l_kv * n_h;
        ops.push_back(op);
    }

    // O = V ⊗ S per head; the V operand is the cache in decode.
    {
        BaseOp op;
        op.id = OpId::AttnOut;
        op.kind = OpKind::BatchedGemm;
        op.m = d_h;
        op.n = l_q;
        op.k = l_kv;
        op.batch = n_h;
        op.inputs = {per_head(TensorName::V, d_h, l_kv, n_h), per_head(TensorName::S, l_kv, l_q, n_h)};
        op.output = per_head(TensorName::O, d_h, l_q, n_h);
        ops.push_back(op);
    }

    {
        BaseOp op;
        op.id = OpId::OutProj;
        op.kind = OpKind::Gemm;
        op.m = d;
        op.n = l_q;
        op.k = d;
        op.inputs = {full(TensorName::W_O, d, d), full(TensorName::O, d, l_q)};
        op.output = full(TensorName::Y, d, l_q);
        ops.push_back(op);
    }

    {
        BaseOp op;
        op.id = OpId::FFN1;
        op.kind = OpKind::Gemm;
        op.m = d_ffn;
        op.n = l_q;
        op.k = d;
        op.inputs = {full(TensorName::A1, d_ffn, d), full(TensorName::Y, d, l_q)};
        op.output = full(TensorName::L1, d_ffn, l_q);
        op.extra_flops = dims.c_gelu * d_ffn * l_q;
        ops.push_back(op);
    }

    {
        BaseOp op;
        op.id = OpId::FFN2;
        op.kind = OpKind::Gemm;
        op.m = d;
        op.n = l_q;
        op.k = d_ffn;
        op.inputs = {full(TensorName::A2, d, d_ffn), full(TensorName::L1, d_ffn, l_q)};
        op.output = full(TensorName::L2, d, l_q);
        ops.push_back(op);
    }

    return ops;
}

LayerTotals layer_totals(const std::vector<BaseOp>& ops, std::int64_t bytes_per_element) {
    LayerTotals t;
    for (const auto& op : ops) {
        t.flops += op.flops();
        t.mops += op.mops(bytes_per_element);
    }
    return t;
}

double arithmetic_intensity(std::int64_t flops, std::int64_t mops) {
    if (mops == 0) throw ValidationError("arithmetic intensity undefined: mops == 0");
    return static_cast<double>(flops) / static_cast<double>(mops);
}

}  // namespace samt
