#pragma once
#include <map>
#include <string>
#include <vector>

#include "pfn/attention.hpp"
#include "pfn/bardist.hpp"
#include "pfn/priors.hpp"
#include "pfn/rng.hpp"
#include "pfn/tape.hpp"
#include "pfn/tensor.hpp"

namespace pfn {

enum class BackboneKind { Transformer, Cnn };
enum class EncoderKind { Linear, Mlp2, Broadcast };
enum class HeadKind { Linear, Mlp, Broadcast };

std::string backbone_name(BackboneKind k);
std::string encoder_name(EncoderKind k);
std::string head_name(HeadKind k);
std::string attention_name(AttentionKind k);
BackboneKind parse_backbone(const std::string& s);
EncoderKind parse_encoder(const std::string& s);
HeadKind parse_head(const std::string& s);
AttentionKind parse_attention(const std::string& s);

struct ModelSpec {
  BackboneKind backbone = BackboneKind::Transformer;
  int64_t input_dim = 1;
  int64_t width = 128;
  int64_t layers = 1;
  int64_t ffn_dim = 512;    // transformer blocks only
  int64_t kernel_size = 5;  // cnn blocks only
  AttentionSpec attention;  // d_k/d_v forced to width by build_model
  EncoderKind phi_x = EncoderKind::Linear;
  EncoderKind phi_y = EncoderKind::Linear;
  HeadKind head = HeadKind::Linear;
  int64_t bucket_count = 100;
};

// Parameters are a name-sorted map so iteration order (initialization,
// optimizer state, checkpoints) is deterministic.
struct PFNModel {
  ModelSpec spec;
  std::map<std::string, Tensor> params;
  BucketSpec buckets;  // filled by the training setup

  int64_t param_count() const;
};

// Xavier-uniform weights, zero biases, unit layer-norm gains.
PFNModel build_model(const ModelSpec& spec, SeededRng& rng);

// Whole-model graph on a tape. Rows are context points followed by queries;
// every row attends to the context rows only. layer_weights[l][h] holds the
// softmax rows for all n_ctx + m rows (empty for linear attention kinds).
struct ForwardGraph {
  Var logits;  // [m x bucket_count]
  std::vector<std::vector<Var>> layer_weights;
  std::map<std::string, Var> leaves;
};
// When shared_leaves is given, parameter leaves are reused across calls on the
// same tape so batched losses accumulate gradients into one leaf per tensor.
ForwardGraph forward_graph(Tape& t, const PFNModel& model, const Tensor& ctx_x,
                           const Tensor& ctx_y, const Tensor& query_x,
                           bool track_params,
                           std::map<std::string, Var>* shared_leaves = nullptr);

// Convenience non-tape forward returning the query logits.
Tensor forward(const PFNModel& model, const Tensor& ctx_x, const Tensor& ctx_y,
               const Tensor& query_x);

// Forward plus the captured per-layer, per-head query attention weights.
struct CapturedForward {
  Tensor logits;
  std::vector<std::vector<Tensor>> weights;  // [layer][head] -> [m x n_ctx]
};
CapturedForward forward_captured(const PFNModel& model, const Tensor& ctx_x,
                                 const Tensor& ctx_y, const Tensor& query_x);

// Per-head plus head-averaged (head = -1) distance/weight pairs at one layer.
// The dataset is split at n_context rows (n/2 when n_context < 0); distances
// are euclidean in raw input space.
LocalityProfile locality_profile(const PFNModel& model,
                                 const SyntheticDataset& data, int layer,
                                 int64_t n_context = -1);

}  // namespace pfn
