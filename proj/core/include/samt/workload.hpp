#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace samt {

// ============================================================
// Transformer layer workload model.
//
// One encoder/decoder layer is nine base operators:
//   QProj, KProj, VProj : Q/K/V = W ⊗ X          (d x l_q x d)
//   AttnScore           : A = Q^T ⊗ K, per head  (l_q x l_kv x d/n_h)
//   Softmax             : S = softmax(A)          elementwise
//   AttnOut             : O = V ⊗ S, per head    (d/n_h x l_q x l_kv)
//   OutProj             : Y = W_O ⊗ O            (d x l_q x d)
//   FFN1                : L1 = GELU(A1 ⊗ Y)      (d_ffn x l_q x d)
//   FFN2                : L2 = A2 ⊗ L1           (d x l_q x d_ffn)
//
// Prefill processes l_q = l_kv = l tokens; decode processes one query
// token (l_q = 1) against a KV cache of kv_len tokens (l_kv = kv_len).
// The head count is always an explicit batch on the attention GEMMs,
// never folded into M/N/K.
//
// FLOPs: 2*M*N*K per GEMM output chain, plus c_sm FLOPs per softmax
// element and c_gelu FLOPs per FFN1 output element.
// MOPs: compulsory traffic only — each distinct input footprint plus
// the output footprint, in bytes. Bias vectors are omitted from
// footprints (they are O(dim) against O(dim^2) operands).
// ============================================================

enum class RunMode { Prefill, Decode };

struct ModelDims {
    std::int64_t d = 768;         // embedding size
    std::int64_t l = 1024;        // sequence length (prefill token count)
    std::int64_t n_h = 12;        // attention heads; must divide d
    std::int64_t d_ffn = 0;       // 0 -> defaulted to 4*d
    std::int64_t bytes_per_element = 1;
    RunMode mode = RunMode::Prefill;
    std::int64_t kv_len = 0;      // decode only: cached context length
    std::int64_t c_sm = 5;        // FLOPs per softmax element
    std::int64_t c_gelu = 8;      // FLOPs per GELU element

    [[nodiscard]] std::int64_t ffn_dim() const { return d_ffn > 0 ? d_ffn : 4 * d; }
    [[nodiscard]] std::int64_t head_dim() const { return d / n_h; }
    [[nodiscard]] std::int64_t query_len() const { return mode == RunMode::Prefill ? l : 1; }
    [[nodiscard]] std::int64_t key_len() const { return mode == RunMode::Prefill ? l : kv_len; }

    // Returns one message per violated constraint, each naming the field.
    [[nodiscard]] std::vector<std::string> validate() const;
    // Throws ValidationError with all violations joined.
    void ensure_valid() const;
};

enum class OpId { QProj, KProj, VProj, AttnScore, Softmax, AttnOut, OutProj, FFN1, FFN2 };
inline constexpr int kOpsPerLayer = 9;
enum class OpKind { Gemm, BatchedGemm, Elementwise };

enum class TensorName { X, W_Q, W_K, W_V, W_O, Q, K, V, A, S, O, Y, A1, B1, A2, B2, L1, L2 };

struct TensorRef {
    TensorName name = TensorName::X;
    std::int64_t rows = 0;       // per-head rows when per_head, else full
    std::int64_t cols = 0;
    std::int64_t batch = 1;      // head count for per-head tensors
    bool per_head = false;

    [[nodiscard]] std::int64_t footprint_elems() const { return rows * cols * batch; }
    [[nodiscard]] std::int64_t footprint_bytes(std::int64_t bytes_per_element) const {
        return footprint_elems() * bytes_per_element;
    }
};

struct BaseOp {
    OpId id = OpId::QProj;
    OpKind kind = OpKind::Gemm;
    std::int64_t m = 0;          // per-batch-slice GEMM dims
    std::int64_t n = 0;
    std::int64_t k = 0;
    std::int64_t batch = 1;
    std::vector<TensorRef> inputs;
    TensorRef output;
    std::int64_t extra_flops = 0;  // softmax / GELU elementwise work

    [[nodiscard]] std::int64_t mac_count() const {
        return kind == OpKind::Elementwise ? 0 : m * n * k * batch;
    }
    [[nodiscard]] std::int64_t flops() const { return 2 * mac_count() + extra_flops; }
    [[nodiscard]] std::int64_t mops(std::int64_t bytes_per_element) const;
};

[[nodiscard]] const char* op_name(OpId id);
[[nodiscard]] const char* tensor_name(TensorName name);

// The nine operators of one layer in dependency order.
[[nodiscard]] std::vector<BaseOp> build_layer(const ModelDims& dims);

struct LayerTotals {
    std::int64_t flops = 0;
    std::int64_t mops = 0;
};

[[nodiscard]] LayerTotals layer_totals(const std::vector<BaseOp>& ops,
                                       std::int64_t bytes_per_element);

// FLOPs / MOPs. Throws ValidationError when mops == 0.
[[nodiscard]] double arithmetic_intensity(std::int64_t flops, std::int64_t mops);

}  // namespace samt
