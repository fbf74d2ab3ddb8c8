#include "pfn/linalg.hpp"

#include <cmath>

#include "pfn/error.hpp"

namespace pfn {

namespace {

bool try_cholesky(const Tensor& a, double jitter, Tensor& l) {
  int64_t n = a.rows();
  l = Tensor::zeros({n, n});
  for (int64_t j = 0; j < n; ++j) {
    double diag = a.at(j, j) + jitter;
    for (int64_t k = 0; k < j; ++k) diag -= l.at(j, k) * l.at(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    double ljj = std::sqrt(diag);
    l.at(j, j) = ljj;
    for (int64_t i = j + 1; i < n; ++i) {
      double s = a.at(i, j) + (i == j ? jitter : 0.0);
      for (int64_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

Tensor cholesky(const Tensor& a, double jitter, double* jitter_used) {
  if (a.ndim() != 2 || a.rows() != a.cols())
    throw DimensionError("cholesky: square matrix required");
  if (jitter < 0.0) throw ContractError("cholesky: negative jitter");
  Tensor l;
  double j = jitter;
  if (try_cholesky(a, j, l)) {
    if (jitter_used) *jitter_used = j;
    return l;
  }
  j = jitter > 0.0 ? jitter * 10.0 : 1e-6;
  while (j <= 1e-3 * (1.0 + 1e-12)) {
    if (try_cholesky(a, j, l)) {
      if (jitter_used) *jitter_used = j;
      return l;
    }
    j *= 10.0;
  }
  throw NotSpdError("cholesky: non-positive pivot after jitter escalation to 1e-3");
}

Tensor tri_solve_lower(const Tensor& l, const Tensor& b) {
  int64_t n = l.rows();
  if (l.cols() != n || b.rows() != n)
    throw DimensionError("tri_solve_lower: shape mismatch");
  int64_t m = b.cols();
  Tensor y = b;
  for (int64_t c = 0; c < m; ++c)
    for (int64_t i = 0; i < n; ++i) {
      double s = y.at(i, c);
      for (int64_t k = 0; k < i; ++k) s -= l.at(i, k) * y.at(k, c);
      y.at(i, c) = s / l.at(i, i);
    }
  return y;
}

Tensor chol_solve(const Tensor& l, const Tensor& b) {
  Tensor y = tri_solve_lower(l, b);
  int64_t n = l.rows(), m = y.cols();
  for (int64_t c = 0; c < m; ++c)
    for (int64_t i = n - 1; i >= 0; --i) {
      double s = y.at(i, c);
      for (int64_t k = i + 1; k < n; ++k) s -= l.at(k, i) * y.at(k, c);
      y.at(i, c) = s / l.at(i, i);
    }
  return y;
}

double chol_logdet(const Tensor& l) {
  double s = 0.0;
  for (int64_t i = 0; i < l.rows(); ++i) s += std::log(l.at(i, i));
  return 2.0 * s;
}

std::vector<double> sample_mvn(const Tensor& l, SeededRng& rng) {
  int64_t n = l.rows();
  std::vector<double> z(static_cast<size_t>(n));
  for (auto& v : z) v = rng.normal();
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t k = 0; k <= i; ++k) s += l.at(i, k) * z[static_cast<size_t>(k)];
    out[static_cast<size_t>(i)] = s;
  }
  return out;
}

}  // namespace pfn
