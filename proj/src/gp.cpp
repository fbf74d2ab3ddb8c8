#include "pfn/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pfn/error.hpp"
#include "pfn/linalg.hpp"

namespace pfn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_hyper(const GPHyper& hyper, int64_t dim) {
  if (hyper.lengthscales.empty())
    throw ContractError("gp: no lengthscales given");
  if (hyper.lengthscales.size() != 1 &&
      hyper.lengthscales.size() != static_cast<size_t>(dim))
    throw ContractError("gp: lengthscale count must be 1 or input dim");
  for (double l : hyper.lengthscales)
    if (!(l > 0.0)) throw ContractError("gp: lengthscale must be positive");
  if (!(hyper.signal_variance > 0.0))
    throw ContractError("gp: signal_variance must be positive");
  if (!(hyper.noise_variance > 0.0))
    throw ContractError("gp: noise_variance must be positive");
}

Tensor noisy_train_gram(const GPHyper& hyper, const Tensor& x) {
  Tensor k = gp_gram(x, x, hyper);
  for (int64_t i = 0; i < k.rows(); ++i)
    k.at(i, i) += hyper.noise_variance;
  return k;
}

}  // namespace

Tensor gp_gram(const Tensor& a, const Tensor& b, const GPHyper& hyper) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
    throw DimensionError("gp_gram: input dims disagree");
  check_hyper(hyper, a.cols());
  int64_t m = a.rows(), n = b.rows(), d = a.cols();
  bool shared = hyper.lengthscales.size() == 1;
  Tensor k = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double q = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        double l = hyper.lengthscales[shared ? 0 : static_cast<size_t>(c)];
        double diff = (a.at(i, c) - b.at(j, c)) / l;
        q += diff * diff;
      }
      k.at(i, j) = hyper.signal_variance * std::exp(-0.5 * q);
    }
  return k;
}

GPPosterior gp_predict(const GPHyper& hyper, const Tensor& x_train,
                       const std::vector<double>& y_train,
                       const Tensor& x_test) {
  if (x_train.ndim() != 2 || x_train.rows() == 0)
    throw ContractError("gp_predict: empty training set");
  if (static_cast<size_t>(x_train.rows()) != y_train.size())
    throw DimensionError("gp_predict: y size disagrees with x_train rows");
  if (x_test.ndim() != 2 || x_test.cols() != x_train.cols())
    throw DimensionError("gp_predict: test dims disagree with train");
  check_hyper(hyper, x_train.cols());

  int64_t n = x_train.rows(), m = x_test.rows();
  Tensor l = cholesky(noisy_train_gram(hyper, x_train));
  Tensor k_cross = gp_gram(x_train, x_test, hyper);  // n x m
  Tensor solved = chol_solve(l, k_cross);            // n x m

  GPPosterior post;
  post.beta = Tensor::zeros({m, n});
  for (int64_t j = 0; j < m; ++j)
    for (int64_t i = 0; i < n; ++i) post.beta.at(j, i) = solved.at(i, j);

  post.mean.assign(static_cast<size_t>(m), 0.0);
  post.variance.assign(static_cast<size_t>(m), 0.0);
  double prior_var = hyper.signal_variance + hyper.noise_variance;
  for (int64_t j = 0; j < m; ++j) {
    double mu = 0.0, reduction = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      mu += post.beta.at(j, i) * y_train[static_cast<size_t>(i)];
      reduction += k_cross.at(i, j) * solved.at(i, j);
    }
    double var = prior_var - reduction;
    if (var < -1e-9 * prior_var)
      throw NumericError("gp_predict: negative predictive variance " +
                         std::to_string(var));
    post.mean[static_cast<size_t>(j)] = mu;
    post.variance[static_cast<size_t>(j)] = std::max(var, 0.0);
  }
  return post;
}

double log_marginal_likelihood(const GPHyper& hyper, const Tensor& x,
                               const std::vector<double>& y) {
  if (x.ndim() != 2 || x.rows() == 0)
    throw ContractError("log_marginal_likelihood: empty dataset");
  if (static_cast<size_t>(x.rows()) != y.size())
    throw DimensionError("log_marginal_likelihood: y size disagrees with x");
  check_hyper(hyper, x.cols());

  int64_t n = x.rows();
  Tensor l = cholesky(noisy_train_gram(hyper, x));
  Tensor yc = Tensor::zeros({n, 1});
  for (int64_t i = 0; i < n; ++i) yc.at(i, 0) = y[static_cast<size_t>(i)];
  Tensor alpha = chol_solve(l, yc);
  double fit = 0.0;
  for (int64_t i = 0; i < n; ++i)
    fit += y[static_cast<size_t>(i)] * alpha.at(i, 0);
  return -0.5 * fit - 0.5 * chol_logdet(l) -
         0.5 * static_cast<double>(n) * std::log(kTwoPi);
}

namespace {

double log_ls_product(const GPHyper& h) {
  double s = 0.0;
  for (double l : h.lengthscales) s += std::log(l);
  return s;
}

bool smoother(const GPHyper& a, const GPHyper& b) {
  double la = log_ls_product(a), lb = log_ls_product(b);
  if (la != lb) return la > lb;
  return a.noise_variance > b.noise_variance;
}

}  // namespace

GPHyper gp_fit(const Tensor& x, const std::vector<double>& y,
               const std::vector<GPHyper>& grid) {
  if (grid.empty()) throw ContractError("gp_fit: empty candidate grid");
  double best_lml = -std::numeric_limits<double>::infinity();
  const GPHyper* best = nullptr;
  for (const GPHyper& cand : grid) {
    double lml = log_marginal_likelihood(cand, x, y);
    if (best == nullptr || lml > best_lml ||
        (lml == best_lml && smoother(cand, *best))) {
      best_lml = lml;
      best = &cand;
    }
  }
  return *best;
}

std::vector<GPHyper> default_gp_grid(const std::vector<double>& y,
                                     int lengthscale_count,
                                     double lengthscale_min,
                                     double lengthscale_max, int noise_count,
                                     double noise_min, double noise_max) {
  if (lengthscale_count < 1 || noise_count < 1)
    throw ContractError("default_gp_grid: counts must be positive");
  if (y.empty()) throw ContractError("default_gp_grid: empty targets");
  double mean = std::accumulate(y.begin(), y.end(), 0.0) /
                static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  double signal = std::max(var, 1e-12);

  auto log_space = [](double lo, double hi, int count) {
    std::vector<double> out;
    if (count == 1) {
      out.push_back(lo);
      return out;
    }
    double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int i = 0; i < count; ++i)
      out.push_back(std::exp(std::log(lo) + step * i));
    return out;
  };

  std::vector<GPHyper> grid;
  for (double l : log_space(lengthscale_min, lengthscale_max, lengthscale_count))
    for (double nv : log_space(noise_min, noise_max, noise_count)) {
      GPHyper h;
      h.lengthscales = {l};
      h.signal_variance = signal;
      h.noise_variance = nv;
      grid.push_back(h);
    }
  return grid;
}

GPHyper gp_fit_ard(const Tensor& x, const std::vector<double>& y,
                   const std::vector<double>& lengthscale_grid,
                   const std::vector<double>& noise_grid, int passes) {
  if (lengthscale_grid.empty() || noise_grid.empty())
    throw ContractError("gp_fit_ard: empty grid");
  if (passes < 1) throw ContractError("gp_fit_ard: passes must be positive");
  if (x.ndim() != 2 || x.rows() == 0)
    throw ContractError("gp_fit_ard: empty dataset");

  std::vector<GPHyper> shared_grid;
  double mean = std::accumulate(y.begin(), y.end(), 0.0) /
                static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  for (double l : lengthscale_grid)
    for (double nv : noise_grid) {
      GPHyper h;
      h.lengthscales = {l};
      h.signal_variance = std::max(var, 1e-12);
      h.noise_variance = nv;
      shared_grid.push_back(h);
    }
  GPHyper best = gp_fit(x, y, shared_grid);
  best.lengthscales.assign(static_cast<size_t>(x.cols()),
                           best.lengthscales[0]);
  double best_lml = log_marginal_likelihood(best, x, y);

  for (int pass = 0; pass < passes; ++pass) {
    bool changed = false;
    for (size_t d = 0; d < best.lengthscales.size(); ++d) {
      for (double l : lengthscale_grid) {
        GPHyper cand = best;
        cand.lengthscales[d] = l;
        double lml = log_marginal_likelihood(cand, x, y);
        if (lml > best_lml) {
          best_lml = lml;
          best = cand;
          changed = true;
        }
      }
    }
    for (double nv : noise_grid) {
      GPHyper cand = best;
      cand.noise_variance = nv;
      double lml = log_marginal_likelihood(cand, x, y);
      if (lml > best_lml) {
        best_lml = lml;
        best = cand;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return best;
}

}  // namespace pfn
