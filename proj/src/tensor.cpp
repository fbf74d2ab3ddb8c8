#include "pfn/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <mutex>

#include "pfn/error.hpp"

extern "C" void openblas_set_num_threads(int);

namespace pfn {

namespace {
std::once_flag blas_once;
void init_blas() {
  // All parallelism in this codebase is at the dataset level; BLAS must stay
  // single-threaded so results do not depend on its internal scheduling.
  std::call_once(blas_once, [] { openblas_set_num_threads(1); });
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw DimensionError("tensor: negative dimension");
    n *= d;
  }
  data.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t(std::vector<int64_t>{});
  t.data.assign(1, v);
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  Tensor t;
  t.shape = {1, static_cast<int64_t>(v.size())};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(int64_t r, int64_t c, std::vector<double> v) {
  if (static_cast<int64_t>(v.size()) != r * c)
    throw DimensionError("tensor: data size does not match r*c");
  Tensor t;
  t.shape = {r, c};
  t.data = std::move(v);
  return t;
}

int64_t Tensor::rows() const {
  if (shape.size() != 2) throw DimensionError("tensor: rows() needs rank 2");
  return shape[0];
}

int64_t Tensor::cols() const {
  if (shape.size() != 2) throw DimensionError("tensor: cols() needs rank 2");
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void mm_acc(Tensor& out, const Tensor& a, const Tensor& b, bool ta, bool tb,
            double alpha) {
  init_blas();
  if (a.ndim() != 2 || b.ndim() != 2 || out.ndim() != 2)
    throw DimensionError("mm: rank-2 operands required");
  int64_t m = ta ? a.cols() : a.rows();
  int64_t k = ta ? a.rows() : a.cols();
  int64_t kb = tb ? b.cols() : b.rows();
  int64_t n = tb ? b.rows() : b.cols();
  if (k != kb) throw DimensionError("mm: inner dimensions disagree");
  if (out.rows() != m || out.cols() != n)
    throw DimensionError("mm: output shape mismatch");
  if (m == 0 || n == 0) return;
  if (k == 0) return;  // beta=1 accumulate of nothing
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a.data.data(),
              static_cast<int>(a.cols()), b.data.data(),
              static_cast<int>(b.cols()), 1.0, out.data.data(),
              static_cast<int>(n));
}

Tensor mm(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  int64_t m = ta ? a.cols() : a.rows();
  int64_t n = tb ? b.rows() : b.cols();
  Tensor out = Tensor::zeros({m, n});
  mm_acc(out, a, b, ta, tb, 1.0);
  return out;
}

}  // namespace pfn
