#pragma once
#include <cstdint>
#include <vector>

namespace pfn {

// Dense row-major fp64 tensor. Rank 0 (scalar), 1, or 2 in practice.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s);

  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);                       // [1 x n]
  static Tensor matrix(int64_t r, int64_t c, std::vector<double> v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t ndim() const { return static_cast<int64_t>(shape.size()); }
  int64_t rows() const;
  int64_t cols() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }
};

// C = op(a) * op(b) via BLAS; op is transpose when the flag is set.
Tensor mm(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

// out += alpha * op(a) * op(b); out must already have the result shape.
void mm_acc(Tensor& out, const Tensor& a, const Tensor& b, bool ta, bool tb,
            double alpha = 1.0);

}  // namespace pfn
