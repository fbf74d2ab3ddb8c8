#pragma once
#include "pfn/rng.hpp"
#include "pfn/tensor.hpp"

namespace pfn {

// Lower Cholesky factor of (a + j*I). Starts from the requested jitter; on a
// non-positive pivot the jitter escalates tenfold from 1e-6 up to 1e-3 before
// giving up with NotSpdError. The jitter actually applied is reported through
// jitter_used when non-null.
Tensor cholesky(const Tensor& a, double jitter = 0.0,
                double* jitter_used = nullptr);

// Solves L y = b for lower-triangular L; b may carry multiple columns.
Tensor tri_solve_lower(const Tensor& l, const Tensor& b);

// Solves (L L^T) x = b.
Tensor chol_solve(const Tensor& l, const Tensor& b);

// log det(L L^T) = 2 * sum(log diag L)
double chol_logdet(const Tensor& l);

// Draw from N(0, L L^T).
std::vector<double> sample_mvn(const Tensor& l, SeededRng& rng);

}  // namespace pfn
