#pragma once
#include <vector>

#include "pfn/tensor.hpp"

namespace pfn {

// RBF hyperparameters. One lengthscale is shared across input dims;
// one per dim enables automatic relevance determination.
struct GPHyper {
  std::vector<double> lengthscales{1.0};
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
};

// Posterior over test points. Each row of beta holds the context weights of
// one test point, so mean = beta * y_train exactly.
struct GPPosterior {
  std::vector<double> mean;
  std::vector<double> variance;  // includes observation noise
  Tensor beta;                   // m x n
};

// ARD RBF gram matrix between row sets a and b.
Tensor gp_gram(const Tensor& a, const Tensor& b, const GPHyper& hyper);

// Exact posterior via Cholesky of (K + noise*I).
GPPosterior gp_predict(const GPHyper& hyper, const Tensor& x_train,
                       const std::vector<double>& y_train,
                       const Tensor& x_test);

double log_marginal_likelihood(const GPHyper& hyper, const Tensor& x,
                               const std::vector<double>& y);

// Argmax of the marginal likelihood over the candidate grid. Ties break
// toward the smoother model: larger lengthscale product, then larger noise.
GPHyper gp_fit(const Tensor& x, const std::vector<double>& y,
               const std::vector<GPHyper>& grid);

// Shared-lengthscale candidate grid: log-spaced lengthscales x noises with
// signal variance matched to the sample variance of y.
std::vector<GPHyper> default_gp_grid(const std::vector<double>& y,
                                     int lengthscale_count = 9,
                                     double lengthscale_min = 0.05,
                                     double lengthscale_max = 2.0,
                                     int noise_count = 5,
                                     double noise_min = 1e-6,
                                     double noise_max = 1e-1);

// ARD fit: best shared fit first, then per-dimension sweeps over the same
// lengthscale grid until a full pass leaves the choice unchanged (at most
// `passes` rounds).
GPHyper gp_fit_ard(const Tensor& x, const std::vector<double>& y,
                   const std::vector<double>& lengthscale_grid,
                   const std::vector<double>& noise_grid, int passes = 2);

}  // namespace pfn
