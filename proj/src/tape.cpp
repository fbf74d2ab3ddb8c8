#include "pfn/tape.hpp"

#include <cmath>
#include <string>

#include "pfn/error.hpp"

namespace pfn {

namespace {
constexpr double kLnEps = 1e-5;   // layer_norm variance floor
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Var Tape::push(Tensor value, bool track) {
  nodes_.push_back(Node{std::move(value), Tensor{}, track, nullptr});
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value, bool track) { return push(std::move(value), track); }

const Tensor& Tape::grad(Var v) const {
  if (nodes_[v.id].grad.data.empty() && nodes_[v.id].value.numel() > 0)
    throw ContractError("tape: grad read before backward");
  return nodes_[v.id].grad;
}

void Tape::check2d(Var v, const char* op) const {
  if (val(v).ndim() != 2)
    throw DimensionError(std::string(op) + ": rank-2 operand required");
}

void Tape::backward(Var loss) {
  if (!loss.valid() || val(loss).numel() != 1)
    throw ContractError("tape: backward needs a scalar loss node");
  for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
  nodes_[loss.id].grad.data[0] = 1.0;
  for (int64_t i = static_cast<int64_t>(nodes_.size()) - 1; i >= 0; --i) {
    auto& n = nodes_[static_cast<size_t>(i)];
    if (n.track && n.pull) n.pull(*this);
  }
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
  Var out = push(mm(val(a), val(b), ta, tb), tracked(a) || tracked(b));
  if (tracked(out)) {
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      if (t.tracked(a)) {
        if (!ta && !tb) mm_acc(t.g(a), G, t.val(b), false, true);
        else if (ta && !tb) mm_acc(t.g(a), t.val(b), G, false, true);
        else if (!ta && tb) mm_acc(t.g(a), G, t.val(b), false, false);
        else mm_acc(t.g(a), t.val(b), G, true, true);
      }
      if (t.tracked(b)) {
        if (!ta && !tb) mm_acc(t.g(b), t.val(a), G, true, false);
        else if (ta && !tb) mm_acc(t.g(b), t.val(a), G, false, false);
        else if (!ta && tb) mm_acc(t.g(b), G, t.val(a), true, false);
        else mm_acc(t.g(b), G, t.val(a), true, true);
      }
    });
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw DimensionError("add: shape mismatch");
  Tensor v = val(a);
  const Tensor& bb = val(b);
  for (int64_t i = 0; i < v.numel(); ++i) v.at(i) += bb.at(i);
  Var out = push(std::move(v), tracked(a) || tracked(b));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      if (t.tracked(a))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(a).at(i) += G.at(i);
      if (t.tracked(b))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(b).at(i) += G.at(i);
    });
  return out;
}

Var Tape::sub(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw DimensionError("sub: shape mismatch");
  Tensor v = val(a);
  const Tensor& bb = val(b);
  for (int64_t i = 0; i < v.numel(); ++i) v.at(i) -= bb.at(i);
  Var out = push(std::move(v), tracked(a) || tracked(b));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      if (t.tracked(a))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(a).at(i) += G.at(i);
      if (t.tracked(b))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(b).at(i) -= G.at(i);
    });
  return out;
}

Var Tape::mul(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw DimensionError("mul: shape mismatch");
  Tensor v = val(a);
  const Tensor& bb = val(b);
  for (int64_t i = 0; i < v.numel(); ++i) v.at(i) *= bb.at(i);
  Var out = push(std::move(v), tracked(a) || tracked(b));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      if (t.tracked(a))
        for (int64_t i = 0; i < G.numel(); ++i)
          t.g(a).at(i) += G.at(i) * t.val(b).at(i);
      if (t.tracked(b))
        for (int64_t i = 0; i < G.numel(); ++i)
          t.g(b).at(i) += G.at(i) * t.val(a).at(i);
    });
  return out;
}

Var Tape::add_rowvec(Var a, Var v) {
  check2d(a, "add_rowvec");
  check2d(v, "add_rowvec");
  if (val(v).rows() != 1 || val(v).cols() != val(a).cols())
    throw DimensionError("add_rowvec: vector shape mismatch");
  Tensor out = val(a);
  const Tensor& vv = val(v);
  int64_t m = out.rows(), d = out.cols();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) += vv.at(0, j);
  Var o = push(std::move(out), tracked(a) || tracked(v));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      if (t.tracked(a))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(a).at(i) += G.at(i);
      if (t.tracked(v))
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < d; ++j) t.g(v).at(0, j) += G.at(i, j);
    });
  return o;
}

Var Tape::scale(Var a, double s) {
  Tensor v = val(a);
  for (double& x : v.data) x *= s;
  Var out = push(std::move(v), tracked(a));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      for (int64_t i = 0; i < G.numel(); ++i) t.g(a).at(i) += s * G.at(i);
    });
  return out;
}

Var Tape::mul_scalar(Var a, Var s) {
  if (val(s).numel() != 1) throw DimensionError("mul_scalar: s must be scalar");
  double sv = val(s).at(0);
  Tensor v = val(a);
  for (double& x : v.data) x *= sv;
  Var out = push(std::move(v), tracked(a) || tracked(s));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      if (t.tracked(a))
        for (int64_t i = 0; i < G.numel(); ++i) t.g(a).at(i) += sv * G.at(i);
      if (t.tracked(s)) {
        double acc = 0.0;
        for (int64_t i = 0; i < G.numel(); ++i) acc += G.at(i) * t.val(a).at(i);
        t.g(s).at(0) += acc;
      }
    });
  return out;
}

Var Tape::exp_elem(Var a) {
  Tensor v = val(a);
  for (double& x : v.data) x = std::exp(x);
  Var out = push(std::move(v), tracked(a));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      for (int64_t i = 0; i < G.numel(); ++i)
        t.g(a).at(i) += G.at(i) * t.val(out).at(i);
    });
  return out;
}

Var Tape::gelu(Var a) {
  Tensor v = val(a);
  for (double& x : v.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  Var out = push(std::move(v), tracked(a));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      for (int64_t i = 0; i < G.numel(); ++i) {
        double x = t.val(a).at(i);
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        t.g(a).at(i) += G.at(i) * (cdf + x * pdf);
      }
    });
  return out;
}

Var Tape::elu1(Var a) {
  Tensor v = val(a);
  for (double& x : v.data) x = x > 0.0 ? x + 1.0 : std::exp(x);
  Var out = push(std::move(v), tracked(a));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      for (int64_t i = 0; i < G.numel(); ++i) {
        double x = t.val(a).at(i);
        t.g(a).at(i) += G.at(i) * (x > 0.0 ? 1.0 : std::exp(x));
      }
    });
  return out;
}

Var Tape::softmax_rows(Var a, double temperature) {
  check2d(a, "softmax_rows");
  if (!(temperature > 0.0)) throw ContractError("softmax_rows: temperature <= 0");
  if (!val(a).all_finite()) throw NumericError("softmax_rows: non-finite input");
  Tensor v = val(a);
  int64_t m = v.rows(), n = v.cols();
  if (n == 0) throw DimensionError("softmax_rows: empty rows");
  for (int64_t i = 0; i < m; ++i) {
    double mx = v.at(i, 0);
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, v.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      double e = std::exp((v.at(i, j) - mx) / temperature);
      v.at(i, j) = e;
      z += e;
    }
    for (int64_t j = 0; j < n; ++j) v.at(i, j) /= z;
  }
  Var out = push(std::move(v), tracked(a));
  if (tracked(out))
    set_pull(out, [=](Tape& t) {
      const Tensor& G = t.g(out);
      const Tensor& Y = t.val(out);
      for (int64_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += G.at(i, j) * Y.at(i, j);
        for (int64_t j = 0; j < n; ++j)
          t.g(a).at(i, j) += Y.at(i, j) * (G.at(i, j) - dot) / temperature;
      }
    });
  return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
  check2d(x, "layer_norm");
  int64_t m = val(x).rows(), d = val(x).cols();
  if (val(gain).numel() != d || val(bias).numel() != d)
    throw DimensionError("layer_norm: gain/bias size mismatch");
  Tensor xhat = Tensor::zeros({m, d});
  Tensor inv = Tensor::zeros({m, 1});
  Tensor out = Tensor::zeros({m, d});
  const Tensor& X = val(x);
  const Tensor& Gn = val(gain);
  const Tensor& B = val(bias);
  for (int64_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += X.at(i, j);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double c = X.at(i, j) - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double iv = 1.0 / std::sqrt(var + kLnEps);
    inv.at(i, 0) = iv;
    for (int64_t j = 0; j < d; ++j) {
      double h = (X.at(i, j) - mu) * iv;
      xhat.at(i, j) = h;
      out.at(i, j) = h * Gn.at(j) + B.at(j);
    }
  }
  Var o = push(std::move(out), tracked(x) || tracked(gain) || tracked(bias));
  if (tracked(o)) {
    set_pull(o, [=, xh = std::move(xhat), iv = std::move(inv)](Tape& t) {
      const Tensor& G = t.g(o);
      if (t.tracked(bias))
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < d; ++j) t.g(bias).at(j) += G.at(i, j);
      if (t.tracked(gain))
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < d; ++j)
            t.g(gain).at(j) += G.at(i, j) * xh.at(i, j);
      if (t.tracked(x)) {
        const Tensor& Gn2 = t.val(gain);
        for (int64_t i = 0; i < m; ++i) {
          double mean_dh = 0.0, mean_dh_xh = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            double dh = G.at(i, j) * Gn2.at(j);
            mean_dh += dh;
            mean_dh_xh += dh * xh.at(i, j);
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_xh /= static_cast<double>(d);
          for (int64_t j = 0; j < d; ++j) {
            double dh = G.at(i, j) * Gn2.at(j);
            t.g(x).at(i, j) +=
                iv.at(i, 0) * (dh - mean_dh - xh.at(i, j) * mean_dh_xh);
          }
        }
      }
    });
  }
  return o;
}

Var Tape::conv1d_depthwise(Var x, Var taps, Var bias) {
  check2d(x, "conv1d_depthwise");
  check2d(taps, "conv1d_depthwise");
  int64_t n = val(x).rows(), d = val(x).cols();
  int64_t k = val(taps).rows();
  if (val(taps).cols() != d) throw DimensionError("conv1d: channel mismatch");
  if (k % 2 == 0) throw ConfigError("conv1d: kernel size must be odd");
  if (val(bias).numel() != d) throw DimensionError("conv1d: bias size mismatch");
  int64_t p = (k - 1) / 2;
  Tensor out = Tensor::zeros({n, d});
  const Tensor& X = val(x);
  const Tensor& T = val(taps);
  const Tensor& B = val(bias);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < d; ++c) {
      double acc = B.at(c);
      for (int64_t t0 = 0; t0 < k; ++t0) {
        int64_t src = i + t0 - p;
        if (src >= 0 && src < n) acc += T.at(t0, c) * X.at(src, c);
      }
      out.at(i, c) = acc;
    }
  Var o = push(std::move(out), tracked(x) || tracked(taps) || tracked(bias));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      if (t.tracked(bias))
        for (int64_t i = 0; i < n; ++i)
          for (int64_t c = 0; c < d; ++c) t.g(bias).at(c) += G.at(i, c);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t t0 = 0; t0 < k; ++t0) {
          int64_t src = i + t0 - p;
          if (src < 0 || src >= n) continue;
          for (int64_t c = 0; c < d; ++c) {
            if (t.tracked(x))
              t.g(x).at(src, c) += G.at(i, c) * t.val(taps).at(t0, c);
            if (t.tracked(taps))
              t.g(taps).at(t0, c) += G.at(i, c) * t.val(x).at(src, c);
          }
        }
    });
  return o;
}

Var Tape::pairwise_sqdist(Var q, Var k) {
  check2d(q, "pairwise_sqdist");
  check2d(k, "pairwise_sqdist");
  if (val(q).cols() != val(k).cols())
    throw DimensionError("pairwise_sqdist: feature dims disagree");
  int64_t m = val(q).rows(), n = val(k).rows(), d = val(q).cols();
  Tensor out = mm(val(q), val(k), false, true);
  const Tensor& Q = val(q);
  const Tensor& K = val(k);
  std::vector<double> qn(static_cast<size_t>(m)), kn(static_cast<size_t>(n));
  for (int64_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += Q.at(i, j) * Q.at(i, j);
    qn[static_cast<size_t>(i)] = s;
  }
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += K.at(i, j) * K.at(i, j);
    kn[static_cast<size_t>(i)] = s;
  }
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      out.at(i, j) = qn[static_cast<size_t>(i)] + kn[static_cast<size_t>(j)] -
                     2.0 * out.at(i, j);
  Var o = push(std::move(out), tracked(q) || tracked(k));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      if (t.tracked(q)) {
        // dq_i += 2 * (rowsum(G)_i * q_i - (G K)_i)
        mm_acc(t.g(q), G, t.val(k), false, false, -2.0);
        for (int64_t i = 0; i < m; ++i) {
          double rs = 0.0;
          for (int64_t j = 0; j < n; ++j) rs += G.at(i, j);
          for (int64_t c = 0; c < d; ++c)
            t.g(q).at(i, c) += 2.0 * rs * t.val(q).at(i, c);
        }
      }
      if (t.tracked(k)) {
        mm_acc(t.g(k), G, t.val(q), true, false, -2.0);
        for (int64_t j = 0; j < n; ++j) {
          double cs = 0.0;
          for (int64_t i = 0; i < m; ++i) cs += G.at(i, j);
          for (int64_t c = 0; c < d; ++c)
            t.g(k).at(j, c) += 2.0 * cs * t.val(k).at(j, c);
        }
      }
    });
  return o;
}

Var Tape::div_cols(Var num, Var den) {
  check2d(num, "div_cols");
  check2d(den, "div_cols");
  int64_t m = val(num).rows(), d = val(num).cols();
  if (val(den).rows() != m || val(den).cols() != 1)
    throw DimensionError("div_cols: denominator must be [m x 1]");
  for (int64_t i = 0; i < m; ++i)
    if (std::abs(val(den).at(i, 0)) < 1e-12)
      throw NumericError("div_cols: denominator magnitude below 1e-12");
  Tensor out = val(num);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) /= val(den).at(i, 0);
  Var o = push(std::move(out), tracked(num) || tracked(den));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      const Tensor& Y = t.val(o);
      const Tensor& D = t.val(den);
      for (int64_t i = 0; i < m; ++i) {
        double dv = D.at(i, 0);
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          if (t.tracked(num)) t.g(num).at(i, j) += G.at(i, j) / dv;
          acc += G.at(i, j) * Y.at(i, j);
        }
        if (t.tracked(den)) t.g(den).at(i, 0) -= acc / dv;
      }
    });
  return o;
}

Var Tape::slice_rows(Var a, int64_t r0, int64_t r1) {
  check2d(a, "slice_rows");
  int64_t m = val(a).rows(), d = val(a).cols();
  if (r0 < 0 || r1 > m || r0 > r1) throw DimensionError("slice_rows: bad range");
  Tensor out = Tensor::zeros({r1 - r0, d});
  for (int64_t i = r0; i < r1; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i - r0, j) = val(a).at(i, j);
  Var o = push(std::move(out), tracked(a));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      for (int64_t i = r0; i < r1; ++i)
        for (int64_t j = 0; j < d; ++j) t.g(a).at(i, j) += G.at(i - r0, j);
    });
  return o;
}

Var Tape::slice_cols(Var a, int64_t c0, int64_t c1) {
  check2d(a, "slice_cols");
  int64_t m = val(a).rows(), d = val(a).cols();
  if (c0 < 0 || c1 > d || c0 > c1) throw DimensionError("slice_cols: bad range");
  Tensor out = Tensor::zeros({m, c1 - c0});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = c0; j < c1; ++j) out.at(i, j - c0) = val(a).at(i, j);
  Var o = push(std::move(out), tracked(a));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = c0; j < c1; ++j) t.g(a).at(i, j) += G.at(i, j - c0);
    });
  return o;
}

Var Tape::concat_rows(Var a, Var b) {
  check2d(a, "concat_rows");
  check2d(b, "concat_rows");
  if (val(a).cols() != val(b).cols())
    throw DimensionError("concat_rows: column mismatch");
  int64_t ma = val(a).rows(), mb = val(b).rows(), d = val(a).cols();
  Tensor out = Tensor::zeros({ma + mb, d});
  for (int64_t i = 0; i < ma; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) = val(a).at(i, j);
  for (int64_t i = 0; i < mb; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(ma + i, j) = val(b).at(i, j);
  Var o = push(std::move(out), tracked(a) || tracked(b));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      if (t.tracked(a))
        for (int64_t i = 0; i < ma; ++i)
          for (int64_t j = 0; j < d; ++j) t.g(a).at(i, j) += G.at(i, j);
      if (t.tracked(b))
        for (int64_t i = 0; i < mb; ++i)
          for (int64_t j = 0; j < d; ++j) t.g(b).at(i, j) += G.at(ma + i, j);
    });
  return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  int64_t m = val(parts[0]).rows();
  int64_t d = 0;
  for (Var p : parts) {
    check2d(p, "concat_cols");
    if (val(p).rows() != m) throw DimensionError("concat_cols: row mismatch");
    d += val(p).cols();
  }
  Tensor out = Tensor::zeros({m, d});
  bool track = false;
  int64_t off = 0;
  for (Var p : parts) {
    int64_t w = val(p).cols();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(i, off + j) = val(p).at(i, j);
    off += w;
    track = track || tracked(p);
  }
  Var o = push(std::move(out), track);
  if (tracked(o))
    set_pull(o, [=, ps = parts](Tape& t) {
      const Tensor& G = t.g(o);
      int64_t c = 0;
      for (Var p : ps) {
        int64_t w = t.val(p).cols();
        if (t.tracked(p))
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j) t.g(p).at(i, j) += G.at(i, c + j);
        c += w;
      }
    });
  return o;
}

Var Tape::broadcast_row(Var v, int64_t m) {
  check2d(v, "broadcast_row");
  if (val(v).rows() != 1) throw DimensionError("broadcast_row: need [1 x d]");
  int64_t d = val(v).cols();
  Tensor out = Tensor::zeros({m, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) = val(v).at(0, j);
  Var o = push(std::move(out), tracked(v));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < d; ++j) t.g(v).at(0, j) += G.at(i, j);
    });
  return o;
}

Var Tape::colsum(Var a) {
  check2d(a, "colsum");
  int64_t m = val(a).rows(), d = val(a).cols();
  Tensor out = Tensor::zeros({1, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(0, j) += val(a).at(i, j);
  Var o = push(std::move(out), tracked(a));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      const Tensor& G = t.g(o);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < d; ++j) t.g(a).at(i, j) += G.at(0, j);
    });
  return o;
}

Var Tape::sum_all(Var a) {
  double s = 0.0;
  for (double x : val(a).data) s += x;
  Var o = push(Tensor::scalar(s), tracked(a));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      double gv = t.g(o).at(0);
      for (int64_t i = 0; i < t.val(a).numel(); ++i) t.g(a).at(i) += gv;
    });
  return o;
}

Var Tape::mean_all(Var a) {
  int64_t n = val(a).numel();
  if (n == 0) throw DimensionError("mean_all: empty tensor");
  double s = 0.0;
  for (double x : val(a).data) s += x;
  Var o = push(Tensor::scalar(s / static_cast<double>(n)), tracked(a));
  if (tracked(o))
    set_pull(o, [=](Tape& t) {
      double gv = t.g(o).at(0) / static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i) t.g(a).at(i) += gv;
    });
  return o;
}

Var Tape::bar_nll(Var logits, const std::vector<int>& buckets,
                  const std::vector<double>& widths) {
  check2d(logits, "bar_nll");
  int64_t m = val(logits).rows(), nb = val(logits).cols();
  if (static_cast<int64_t>(buckets.size()) != m)
    throw DimensionError("bar_nll: one bucket index per row required");
  if (static_cast<int64_t>(widths.size()) != nb)
    throw DimensionError("bar_nll: one width per bucket required");
  if (m == 0) throw ContractError("bar_nll: no rows");
  if (!val(logits).all_finite()) throw NumericError("bar_nll: non-finite logits");
  const Tensor& L = val(logits);
  Tensor probs = Tensor::zeros({m, nb});
  double loss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    int b = buckets[static_cast<size_t>(i)];
    if (b < 0 || b >= nb) throw ContractError("bar_nll: bucket out of range");
    double mx = L.at(i, 0);
    for (int64_t j = 1; j < nb; ++j) mx = std::max(mx, L.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < nb; ++j) {
      double e = std::exp(L.at(i, j) - mx);
      probs.at(i, j) = e;
      z += e;
    }
    for (int64_t j = 0; j < nb; ++j) probs.at(i, j) /= z;
    // -log(p_b / w_b) with the log-sum-exp expanded for stability
    loss += -(L.at(i, b) - mx - std::log(z)) + std::log(widths[static_cast<size_t>(b)]);
  }
  loss /= static_cast<double>(m);
  Var o = push(Tensor::scalar(loss), tracked(logits));
  if (tracked(o))
    set_pull(o, [=, P = std::move(probs), bk = buckets](Tape& t) {
      double gv = t.g(o).at(0) / static_cast<double>(m);
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < nb; ++j)
          t.g(logits).at(i, j) += gv * P.at(i, j);
        t.g(logits).at(i, bk[static_cast<size_t>(i)]) -= gv;
      }
    });
  return o;
}

}  // namespace pfn
