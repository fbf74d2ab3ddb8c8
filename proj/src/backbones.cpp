#include "pfn/backbones.hpp"

#include <cmath>
#include <utility>

#include "pfn/checkpoint.hpp"
#include "pfn/error.hpp"

namespace pfn {

std::string backbone_name(BackboneKind k) {
  return k == BackboneKind::Transformer ? "transformer" : "cnn";
}

std::string encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Linear: return "linear";
    case EncoderKind::Mlp2: return "mlp2";
    case EncoderKind::Broadcast: return "broadcast";
  }
  throw ContractError("encoder_name: bad kind");
}

std::string head_name(HeadKind k) {
  switch (k) {
    case HeadKind::Linear: return "linear";
    case HeadKind::Mlp: return "mlp";
    case HeadKind::Broadcast: return "broadcast";
  }
  throw ContractError("head_name: bad kind");
}

std::string attention_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::VA: return "va";
    case AttentionKind::DVA: return "dva";
    case AttentionKind::KernelRBF: return "kernel_rbf";
    case AttentionKind::LinearVA: return "linear_va";
    case AttentionKind::LinearDVA: return "linear_dva";
  }
  throw ContractError("attention_name: bad kind");
}

BackboneKind parse_backbone(const std::string& s) {
  if (s == "transformer") return BackboneKind::Transformer;
  if (s == "cnn") return BackboneKind::Cnn;
  throw ConfigError("unknown backbone: " + s);
}

EncoderKind parse_encoder(const std::string& s) {
  if (s == "linear") return EncoderKind::Linear;
  if (s == "mlp2") return EncoderKind::Mlp2;
  if (s == "broadcast") return EncoderKind::Broadcast;
  throw ConfigError("unknown encoder: " + s);
}

HeadKind parse_head(const std::string& s) {
  if (s == "linear") return HeadKind::Linear;
  if (s == "mlp") return HeadKind::Mlp;
  if (s == "broadcast") return HeadKind::Broadcast;
  throw ConfigError("unknown head: " + s);
}

AttentionKind parse_attention(const std::string& s) {
  if (s == "va") return AttentionKind::VA;
  if (s == "dva") return AttentionKind::DVA;
  if (s == "kernel_rbf") return AttentionKind::KernelRBF;
  if (s == "linear_va") return AttentionKind::LinearVA;
  if (s == "linear_dva") return AttentionKind::LinearDVA;
  throw ConfigError("unknown attention kind: " + s);
}

namespace {

void validate_spec(const ModelSpec& s) {
  if (s.input_dim < 1) throw ConfigError("model: input_dim < 1");
  if (s.width < 1) throw ConfigError("model: width < 1");
  if (s.layers < 1) throw ConfigError("model: layers < 1");
  if (s.bucket_count < 2) throw ConfigError("model: bucket_count < 2");
  if (s.attention.heads < 1) throw ConfigError("model: heads < 1");
  if (s.width % s.attention.heads != 0)
    throw ConfigError("model: width not divisible by heads");
  if (s.backbone == BackboneKind::Transformer && s.ffn_dim < 1)
    throw ConfigError("model: ffn_dim < 1");
  if (s.backbone == BackboneKind::Cnn &&
      (s.kernel_size < 1 || s.kernel_size % 2 == 0))
    throw ConfigError("model: kernel_size must be odd and positive");
  if (s.phi_x == EncoderKind::Broadcast && s.input_dim > s.width)
    throw ConfigError("model: broadcast phi_x needs input_dim <= width");
  if (s.attention.kind == AttentionKind::KernelRBF &&
      !(s.attention.gamma_init > 0.0))
    throw ConfigError("model: gamma_init must be positive");
}

void encoder_layout(
    std::vector<std::pair<std::string, std::vector<int64_t>>>& out,
    const std::string& prefix, EncoderKind kind, int64_t in_dim,
    int64_t width) {
  switch (kind) {
    case EncoderKind::Linear:
      out.push_back({prefix + ".w", {in_dim, width}});
      out.push_back({prefix + ".b", {1, width}});
      break;
    case EncoderKind::Mlp2:
      out.push_back({prefix + ".w1", {in_dim, width}});
      out.push_back({prefix + ".b1", {1, width}});
      out.push_back({prefix + ".w2", {width, width}});
      out.push_back({prefix + ".b2", {1, width}});
      break;
    case EncoderKind::Broadcast:
      break;  // constant channel tiling, no parameters
  }
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int64_t>>> param_layout(
    const ModelSpec& s) {
  validate_spec(s);
  std::vector<std::pair<std::string, std::vector<int64_t>>> out;
  int64_t w = s.width;
  encoder_layout(out, "phi_x", s.phi_x, s.input_dim, w);
  encoder_layout(out, "phi_y", s.phi_y, 1, w);
  if (!attention_is_decoupled(s.attention.kind))
    out.push_back({"query_token", {1, w}});
  for (int64_t l = 0; l < s.layers; ++l) {
    std::string b = "blk" + std::to_string(l) + ".";
    if (s.backbone == BackboneKind::Cnn) {
      out.push_back({b + "conv.taps", {s.kernel_size, w}});
      out.push_back({b + "conv.b", {1, w}});
    }
    if (attention_is_decoupled(s.attention.kind)) {
      out.push_back({b + "lnx.g", {1, w}});
      out.push_back({b + "lnx.b", {1, w}});
    }
    out.push_back({b + "ln1.g", {1, w}});
    out.push_back({b + "ln1.b", {1, w}});
    out.push_back({b + "attn.wq", {w, w}});
    if (!s.attention.tie_qk) out.push_back({b + "attn.wk", {w, w}});
    out.push_back({b + "attn.wv", {w, w}});
    out.push_back({b + "attn.wo", {w, w}});
    if (s.attention.kind == AttentionKind::KernelRBF)
      out.push_back({b + "attn.lg", {}});
    if (s.backbone == BackboneKind::Transformer) {
      out.push_back({b + "ln2.g", {1, w}});
      out.push_back({b + "ln2.b", {1, w}});
      out.push_back({b + "ffn.w1", {w, s.ffn_dim}});
      out.push_back({b + "ffn.b1", {1, s.ffn_dim}});
      out.push_back({b + "ffn.w2", {s.ffn_dim, w}});
      out.push_back({b + "ffn.b2", {1, w}});
    }
  }
  out.push_back({"head.ln.g", {1, w}});
  out.push_back({"head.ln.b", {1, w}});
  switch (s.head) {
    case HeadKind::Linear:
      out.push_back({"head.w", {w, s.bucket_count}});
      out.push_back({"head.b", {1, s.bucket_count}});
      break;
    case HeadKind::Mlp:
      out.push_back({"head.w1", {w, w}});
      out.push_back({"head.b1", {1, w}});
      out.push_back({"head.w2", {w, s.bucket_count}});
      out.push_back({"head.b2", {1, s.bucket_count}});
      break;
    case HeadKind::Broadcast:
      break;  // first hidden channel copied to every bucket
  }
  return out;
}

namespace {

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

PFNModel build_model(const ModelSpec& spec, SeededRng& rng) {
  PFNModel m;
  m.spec = spec;
  m.spec.attention.d_k = spec.width;
  m.spec.attention.d_v = spec.width;
  for (const auto& [name, shape] : param_layout(m.spec)) {
    Tensor t = shape.empty() ? Tensor::scalar(0.0) : Tensor::zeros(shape);
    if (ends_with(name, ".lg")) {
      t.at(0) = std::log(spec.attention.gamma_init);
    } else if (ends_with(name, ".g")) {
      for (double& v : t.data) v = 1.0;
    } else if (ends_with(name, ".b") || ends_with(name, ".b1") ||
               ends_with(name, ".b2")) {
      // biases stay zero
    } else if (ends_with(name, "conv.taps")) {
      double bound = std::sqrt(3.0 / static_cast<double>(shape[0]));
      for (double& v : t.data) v = rng.uniform(-bound, bound);
    } else {
      double bound =
          std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (double& v : t.data) v = rng.uniform(-bound, bound);
    }
    m.params.emplace(name, std::move(t));
  }
  return m;
}

int64_t PFNModel::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params) n += std::max<int64_t>(t.numel(), 1);
  return n;
}

ForwardGraph forward_graph(Tape& t, const PFNModel& model, const Tensor& ctx_x,
                           const Tensor& ctx_y, const Tensor& query_x,
                           bool track_params,
                           std::map<std::string, Var>* shared_leaves) {
  const ModelSpec& s = model.spec;
  if (ctx_x.rows() == 0) throw ContractError("forward: empty context");
  if (ctx_x.cols() != s.input_dim || query_x.cols() != s.input_dim)
    throw DimensionError("forward: input dim does not match the model");
  if (ctx_y.rows() != ctx_x.rows() || ctx_y.cols() != 1)
    throw DimensionError("forward: context target shape");
  if (query_x.rows() == 0) throw ContractError("forward: no queries");

  const int64_t n = ctx_x.rows(), mq = query_x.rows(), w = s.width;
  ForwardGraph g;
  std::map<std::string, Var>& lv = shared_leaves ? *shared_leaves : g.leaves;
  auto P = [&](const std::string& name) -> Var {
    auto hit = lv.find(name);
    if (hit != lv.end()) return hit->second;
    auto it = model.params.find(name);
    if (it == model.params.end())
      throw ContractError("forward: missing parameter " + name);
    Var v = t.leaf(it->second, track_params);
    lv.emplace(name, v);
    return v;
  };
  auto encode = [&](EncoderKind kind, const std::string& prefix, Var in,
                    int64_t in_dim) -> Var {
    switch (kind) {
      case EncoderKind::Linear:
        return t.add_rowvec(t.matmul(in, P(prefix + ".w")), P(prefix + ".b"));
      case EncoderKind::Mlp2: {
        Var u = t.gelu(
            t.add_rowvec(t.matmul(in, P(prefix + ".w1")), P(prefix + ".b1")));
        return t.add_rowvec(t.matmul(u, P(prefix + ".w2")), P(prefix + ".b2"));
      }
      case EncoderKind::Broadcast: {
        Tensor tile = Tensor::zeros({in_dim, w});
        for (int64_t c = 0; c < w; ++c) tile.at(c % in_dim, c) = 1.0;
        return t.matmul(in, t.constant(tile));
      }
    }
    throw ContractError("forward: bad encoder kind");
  };
  auto ffn = [&](Var h, const std::string& b) -> Var {
    Var u = t.layer_norm(h, P(b + "ln2.g"), P(b + "ln2.b"));
    Var mid =
        t.gelu(t.add_rowvec(t.matmul(u, P(b + "ffn.w1")), P(b + "ffn.b1")));
    return t.add(
        h, t.add_rowvec(t.matmul(mid, P(b + "ffn.w2")), P(b + "ffn.b2")));
  };

  AttentionSpec aspec = s.attention;
  aspec.d_k = w;
  aspec.d_v = w;
  const bool decoupled = attention_is_decoupled(s.attention.kind);
  const bool kernel = s.attention.kind == AttentionKind::KernelRBF;

  Var all_x = t.concat_rows(t.constant(ctx_x), t.constant(query_x));
  Var ex_all = encode(s.phi_x, "phi_x", all_x, s.input_dim);
  Var ey = encode(s.phi_y, "phi_y", t.constant(ctx_y), 1);

  Var h;
  if (decoupled) {
    h = t.concat_rows(ey, t.constant(Tensor::zeros({mq, w})));
  } else {
    Var tok = t.broadcast_row(P("query_token"), mq);
    h = t.add(ex_all, t.concat_rows(ey, tok));
  }

  for (int64_t l = 0; l < s.layers; ++l) {
    std::string b = "blk" + std::to_string(l) + ".";
    if (s.backbone == BackboneKind::Cnn)
      h = t.conv1d_depthwise(h, P(b + "conv.taps"), P(b + "conv.b"));
    Var wq = P(b + "attn.wq");
    Var wk = s.attention.tie_qk ? wq : P(b + "attn.wk");
    Var lg = kernel ? P(b + "attn.lg") : t.constant(Tensor::scalar(0.0));
    AttentionCoreOut core;
    if (decoupled) {
      Var xn = t.layer_norm(ex_all, P(b + "lnx.g"), P(b + "lnx.b"));
      Var vsrc =
          t.layer_norm(t.slice_rows(h, 0, n), P(b + "ln1.g"), P(b + "ln1.b"));
      core = attention_core(t, aspec, wq, wk, P(b + "attn.wv"), lg, xn,
                            t.slice_rows(xn, 0, n), vsrc);
    } else {
      Var u = t.layer_norm(h, P(b + "ln1.g"), P(b + "ln1.b"));
      Var uc = t.slice_rows(u, 0, n);
      core = attention_core(t, aspec, wq, wk, P(b + "attn.wv"), lg, u, uc, uc);
    }
    h = t.add(h, t.matmul(core.h, P(b + "attn.wo")));
    if (s.backbone == BackboneKind::Transformer) h = ffn(h, b);
    g.layer_weights.push_back(core.weight_vars);
  }

  Var hq = t.slice_rows(h, n, n + mq);
  Var hn = t.layer_norm(hq, P("head.ln.g"), P("head.ln.b"));
  switch (s.head) {
    case HeadKind::Linear:
      g.logits = t.add_rowvec(t.matmul(hn, P("head.w")), P("head.b"));
      break;
    case HeadKind::Mlp: {
      Var u = t.gelu(
          t.add_rowvec(t.matmul(hn, P("head.w1")), P("head.b1")));
      g.logits = t.add_rowvec(t.matmul(u, P("head.w2")), P("head.b2"));
      break;
    }
    case HeadKind::Broadcast: {
      Tensor ones = Tensor::zeros({1, s.bucket_count});
      for (double& v : ones.data) v = 1.0;
      g.logits = t.matmul(t.slice_cols(hn, 0, 1), t.constant(ones));
      break;
    }
  }
  if (shared_leaves) g.leaves = *shared_leaves;
  return g;
}

Tensor forward(const PFNModel& model, const Tensor& ctx_x, const Tensor& ctx_y,
               const Tensor& query_x) {
  Tape t;
  ForwardGraph g = forward_graph(t, model, ctx_x, ctx_y, query_x, false);
  return t.val(g.logits);
}

CapturedForward forward_captured(const PFNModel& model, const Tensor& ctx_x,
                                 const Tensor& ctx_y, const Tensor& query_x) {
  Tape t;
  ForwardGraph g = forward_graph(t, model, ctx_x, ctx_y, query_x, false);
  CapturedForward out;
  out.logits = t.val(g.logits);
  const int64_t n = ctx_x.rows(), mq = query_x.rows();
  for (const auto& layer : g.layer_weights) {
    std::vector<Tensor> heads;
    for (Var wv : layer) {
      const Tensor& full = t.val(wv);  // [n + m x n]
      Tensor q = Tensor::zeros({mq, n});
      for (int64_t i = 0; i < mq; ++i)
        for (int64_t j = 0; j < n; ++j) q.at(i, j) = full.at(n + i, j);
      heads.push_back(std::move(q));
    }
    out.weights.push_back(std::move(heads));
  }
  return out;
}

LocalityProfile locality_profile(const PFNModel& model,
                                 const SyntheticDataset& data, int layer,
                                 int64_t n_context) {
  const ModelSpec& s = model.spec;
  if (layer < 0 || layer >= s.layers)
    throw ContractError("locality_profile: layer out of range");
  if (attention_is_linear(s.attention.kind))
    throw ContractError("locality_profile: linear attention has no weights");
  int64_t n = data.n();
  if (n_context < 0) n_context = n / 2;
  if (n_context < 1 || n_context >= n)
    throw ContractError("locality_profile: bad context size");

  Tensor cx = Tensor::zeros({n_context, data.dim()});
  Tensor cy = Tensor::zeros({n_context, 1});
  Tensor qx = Tensor::zeros({n - n_context, data.dim()});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < data.dim(); ++c) {
      if (i < n_context)
        cx.at(i, c) = data.x.at(i, c);
      else
        qx.at(i - n_context, c) = data.x.at(i, c);
    }
  for (int64_t i = 0; i < n_context; ++i)
    cy.at(i, 0) = data.y[static_cast<size_t>(i)];

  CapturedForward cf = forward_captured(model, cx, cy, qx);
  const auto& heads = cf.weights[static_cast<size_t>(layer)];
  const int64_t mq = qx.rows();

  LocalityProfile prof;
  for (int64_t i = 0; i < mq; ++i)
    for (int64_t j = 0; j < n_context; ++j) {
      double d2 = 0.0;
      for (int64_t c = 0; c < data.dim(); ++c) {
        double diff = qx.at(i, c) - cx.at(j, c);
        d2 += diff * diff;
      }
      double dist = std::sqrt(d2);
      double avg = 0.0;
      for (size_t hh = 0; hh < heads.size(); ++hh) {
        double wij = heads[hh].at(i, j);
        prof.entries.push_back({layer, static_cast<int>(hh), dist, wij});
        avg += wij;
      }
      prof.entries.push_back(
          {layer, -1, dist, avg / static_cast<double>(heads.size())});
    }
  return prof;
}

}  // namespace pfn
