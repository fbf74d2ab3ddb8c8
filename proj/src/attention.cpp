#include "pfn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfn/error.hpp"
#include "pfn/linalg.hpp"

namespace pfn {

bool attention_is_decoupled(AttentionKind k) {
  return k == AttentionKind::DVA || k == AttentionKind::KernelRBF ||
         k == AttentionKind::LinearDVA;
}

bool attention_is_linear(AttentionKind k) {
  return k == AttentionKind::LinearVA || k == AttentionKind::LinearDVA;
}

AttentionCoreOut attention_core(Tape& t, const AttentionSpec& spec, Var wq,
                                Var wk, Var wv, Var log_gamma, Var q_src,
                                Var k_src, Var v_src) {
  if (t.val(k_src).rows() == 0) throw ContractError("attention: empty context");
  if (t.val(k_src).rows() != t.val(v_src).rows())
    throw DimensionError("attention: key/value row mismatch");
  int64_t dk = t.val(wq).cols(), dv = t.val(wv).cols();
  if (spec.heads < 1) throw ConfigError("attention: heads < 1");
  if (dk % spec.heads != 0 || dv % spec.heads != 0)
    throw ConfigError("attention: widths must divide evenly across heads");
  int64_t hk = dk / spec.heads, hv = dv / spec.heads;

  Var q = t.matmul(q_src, wq);
  Var k = t.matmul(k_src, wk);
  Var v = t.matmul(v_src, wv);

  AttentionCoreOut out;
  std::vector<Var> head_outs;
  for (int64_t h = 0; h < spec.heads; ++h) {
    Var qh = t.slice_cols(q, h * hk, (h + 1) * hk);
    Var kh = t.slice_cols(k, h * hk, (h + 1) * hk);
    Var vh = t.slice_cols(v, h * hv, (h + 1) * hv);
    if (attention_is_linear(spec.kind)) {
      Var fq = t.elu1(qh);
      Var fk = t.elu1(kh);
      Var num = t.matmul(fq, t.matmul(fk, vh, true, false));
      Var den = t.matmul(fq, t.colsum(fk), false, true);
      head_outs.push_back(t.div_cols(num, den));
    } else {
      Var weights;
      if (spec.kind == AttentionKind::KernelRBF) {
        Var gamma = t.exp_elem(log_gamma);
        Var dist = t.pairwise_sqdist(qh, kh);
        weights = t.softmax_rows(t.scale(t.mul_scalar(dist, gamma), -1.0), 1.0);
      } else {
        Var logits = t.matmul(qh, kh, false, true);
        weights = t.softmax_rows(logits, std::sqrt(static_cast<double>(hk)));
      }
      out.weight_vars.push_back(weights);
      head_outs.push_back(t.matmul(weights, vh));
    }
  }
  out.h = spec.heads == 1 ? head_outs[0] : t.concat_cols(head_outs);
  return out;
}

namespace {

AttentionOutput run_standalone(const AttentionSpec& spec,
                               const AttentionParams& params,
                               const Tensor& q_src, const Tensor& k_src,
                               const Tensor& v_src) {
  Tape t;
  Var wq = t.constant(params.wq);
  Var wk = spec.tie_qk ? wq : t.constant(params.wk);
  Var wv = t.constant(params.wv);
  Var lg = t.constant(Tensor::scalar(params.log_gamma));
  AttentionCoreOut core =
      attention_core(t, spec, wq, wk, wv, lg, t.constant(q_src),
                     t.constant(k_src), t.constant(v_src));
  AttentionOutput out;
  out.h = t.val(core.h);
  for (Var w : core.weight_vars) out.weights.push_back(t.val(w));
  return out;
}

}  // namespace

AttentionOutput dva_forward(const Tensor& ctx_x_emb, const Tensor& ctx_y_emb,
                            const Tensor& query_x_emb,
                            const AttentionParams& params,
                            const AttentionSpec& spec) {
  if (ctx_x_emb.rows() != ctx_y_emb.rows())
    throw DimensionError("dva_forward: context x/y row mismatch");
  return run_standalone(spec, params, query_x_emb, ctx_x_emb, ctx_y_emb);
}

AttentionOutput va_forward(const Tensor& ctx_joint_emb, const Tensor& query_emb,
                           const AttentionParams& params,
                           const AttentionSpec& spec) {
  return run_standalone(spec, params, query_emb, ctx_joint_emb, ctx_joint_emb);
}

AttentionOutput kernel_attention_forward(const Tensor& ctx_x_emb,
                                         const Tensor& ctx_y_emb,
                                         const Tensor& query_x_emb,
                                         const AttentionParams& params,
                                         const AttentionSpec& spec) {
  AttentionSpec s = spec;
  s.kind = AttentionKind::KernelRBF;
  return run_standalone(s, params, query_x_emb, ctx_x_emb, ctx_y_emb);
}

AttentionOutput linear_attention_forward(const Tensor& ctx_qk_emb,
                                         const Tensor& ctx_v_emb,
                                         const Tensor& query_emb,
                                         const AttentionParams& params,
                                         const AttentionSpec& spec) {
  if (!attention_is_linear(spec.kind))
    throw ContractError("linear_attention_forward: spec kind is not linear");
  return run_standalone(spec, params, query_emb, ctx_qk_emb, ctx_v_emb);
}

std::vector<double> mahalanobis_logit_oracle(const Tensor& wq_eff,
                                             const Tensor& wk_eff,
                                             const std::vector<double>& x_star,
                                             const Tensor& x_ctx, double tau) {
  if (!(tau > 0.0)) throw ContractError("mahalanobis oracle: tau <= 0");
  int64_t d = wq_eff.rows();
  if (wk_eff.rows() != d || wq_eff.cols() != wk_eff.cols())
    throw DimensionError("mahalanobis oracle: projection shapes disagree");
  if (static_cast<int64_t>(x_star.size()) != d || x_ctx.cols() != d)
    throw DimensionError("mahalanobis oracle: input dims disagree");

  Tensor a = mm(wq_eff, wk_eff, false, true);  // [d x d]
  double scale = 0.0;
  for (double v : a.data) scale = std::max(scale, std::abs(v));
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j)
      if (std::abs(a.at(i, j) - a.at(j, i)) > 1e-10 * std::max(1.0, scale))
        throw ContractError("mahalanobis oracle: A is not symmetric");
  try {
    (void)cholesky(a, 1e-9 * std::max(1.0, scale));
  } catch (const NotSpdError&) {
    throw ContractError("mahalanobis oracle: A is not PSD");
  }

  auto norm_a = [&](const std::vector<double>& u) {
    double s = 0.0;
    for (int64_t i = 0; i < d; ++i)
      for (int64_t j = 0; j < d; ++j) s += u[i] * a.at(i, j) * u[j];
    return s;
  };
  double nstar = norm_a(x_star);
  std::vector<double> out(static_cast<size_t>(x_ctx.rows()));
  std::vector<double> xi(static_cast<size_t>(d)), diff(static_cast<size_t>(d));
  for (int64_t r = 0; r < x_ctx.rows(); ++r) {
    for (int64_t c = 0; c < d; ++c) {
      xi[static_cast<size_t>(c)] = x_ctx.at(r, c);
      diff[static_cast<size_t>(c)] = x_star[static_cast<size_t>(c)] - x_ctx.at(r, c);
    }
    out[static_cast<size_t>(r)] =
        (nstar + norm_a(xi) - norm_a(diff)) / (2.0 * tau);
  }
  return out;
}

double far_mass(const Tensor& weights, const Tensor& distances, double epsilon) {
  if (!weights.same_shape(distances))
    throw DimensionError("far_mass: weight/distance shapes disagree");
  if (epsilon < 0.0) throw ContractError("far_mass: negative epsilon");
  int64_t m = weights.rows(), n = weights.cols();
  if (m == 0 || n == 0) throw ContractError("far_mass: empty weights");
  double acc = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    double row = 0.0, far = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      row += weights.at(i, j);
      if (distances.at(i, j) > epsilon) far += weights.at(i, j);
    }
    if (std::abs(row - 1.0) > 1e-6)
      throw ContractError("far_mass: weight row does not sum to 1");
    acc += far;
  }
  return acc / static_cast<double>(m);
}

double far_mass(const Tensor& weights, const Tensor& x_query,
                const Tensor& x_ctx, double epsilon) {
  if (x_query.cols() != x_ctx.cols())
    throw DimensionError("far_mass: query/context dims disagree");
  Tensor dist = Tensor::zeros({x_query.rows(), x_ctx.rows()});
  for (int64_t i = 0; i < x_query.rows(); ++i)
    for (int64_t j = 0; j < x_ctx.rows(); ++j) {
      double s = 0.0;
      for (int64_t c = 0; c < x_query.cols(); ++c) {
        double d = x_query.at(i, c) - x_ctx.at(j, c);
        s += d * d;
      }
      dist.at(i, j) = std::sqrt(s);
    }
  return far_mass(weights, dist, epsilon);
}

namespace {
std::vector<double> ranks_with_ties(const std::vector<double>& xs) {
  size_t n = xs.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  return rank;
}
}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw ContractError("spearman: need matched samples, at least 3");
  std::vector<double> rx = ranks_with_ties(xs), ry = ranks_with_ties(ys);
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    double a = rx[i] - mx, b = ry[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace pfn
