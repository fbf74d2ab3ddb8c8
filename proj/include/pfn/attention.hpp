#pragma once
#include <vector>

#include "pfn/tape.hpp"
#include "pfn/tensor.hpp"

namespace pfn {

// VA couples inputs and targets in one embedding stream; DVA computes
// queries/keys from inputs only and values from targets only. KernelRBF
// replaces dot-product logits with -gamma * squared distance. The linear
// kinds use the elu(x)+1 feature map instead of softmax.
enum class AttentionKind { VA, DVA, KernelRBF, LinearVA, LinearDVA };

bool attention_is_decoupled(AttentionKind k);
bool attention_is_linear(AttentionKind k);

struct AttentionSpec {
  AttentionKind kind = AttentionKind::DVA;
  int64_t d_k = 0;  // total key width, split evenly across heads
  int64_t d_v = 0;  // total value width
  int64_t heads = 1;
  bool tie_qk = false;
  double gamma_init = 1.0;  // KernelRBF bandwidth, stored as log gamma
};

// Plain-tensor projection parameters for the standalone forward functions.
struct AttentionParams {
  Tensor wq, wk, wv;  // [d_in x d_k], [d_in x d_k], [d_vin x d_v]
  double log_gamma = 0.0;
};

struct AttentionOutput {
  Tensor h;                      // [m x d_v]
  std::vector<Tensor> weights;   // per head [m x n_ctx]; empty for linear kinds
};

// Tape-level core shared by the standalone functions and the backbones.
// q_src [m x d], k_src [n x d], v_src [n x d_vin]; weight_vars carries the
// per-head softmax nodes (empty for the linear kinds).
struct AttentionCoreOut {
  Var h;
  std::vector<Var> weight_vars;
};
AttentionCoreOut attention_core(Tape& t, const AttentionSpec& spec, Var wq,
                                Var wk, Var wv, Var log_gamma, Var q_src,
                                Var k_src, Var v_src);

AttentionOutput dva_forward(const Tensor& ctx_x_emb, const Tensor& ctx_y_emb,
                            const Tensor& query_x_emb,
                            const AttentionParams& params,
                            const AttentionSpec& spec);

AttentionOutput va_forward(const Tensor& ctx_joint_emb, const Tensor& query_emb,
                           const AttentionParams& params,
                           const AttentionSpec& spec);

AttentionOutput kernel_attention_forward(const Tensor& ctx_x_emb,
                                         const Tensor& ctx_y_emb,
                                         const Tensor& query_x_emb,
                                         const AttentionParams& params,
                                         const AttentionSpec& spec);

// Joint variant reads queries/keys and values from the same context
// embedding; decoupled variant takes separate sources.
AttentionOutput linear_attention_forward(const Tensor& ctx_qk_emb,
                                         const Tensor& ctx_v_emb,
                                         const Tensor& query_emb,
                                         const AttentionParams& params,
                                         const AttentionSpec& spec);

// Logits of tied linear attention expressed through the Mahalanobis
// decomposition (|x*|^2_A + |x_i|^2_A - |x*-x_i|^2_A) / (2 tau) with
// A = Wq Wk^T. Requires A symmetric PSD.
std::vector<double> mahalanobis_logit_oracle(const Tensor& wq_eff,
                                             const Tensor& wk_eff,
                                             const std::vector<double>& x_star,
                                             const Tensor& x_ctx, double tau);

// Mean over query rows of the attention mass on context points farther than
// epsilon. weights and distances are [m x n]; each weight row must sum to 1.
double far_mass(const Tensor& weights, const Tensor& distances, double epsilon);

// Same, with euclidean distances computed from raw coordinates.
double far_mass(const Tensor& weights, const Tensor& x_query,
                const Tensor& x_ctx, double epsilon);

struct LocalityProfile {
  struct Entry {
    int layer;
    int head;  // -1 marks the head-averaged entries
    double distance;
    double weight;
  };
  std::vector<Entry> entries;
};

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace pfn
