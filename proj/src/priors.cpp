#include "pfn/priors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfn/error.hpp"
#include "pfn/linalg.hpp"

namespace pfn {

namespace {

double sqdist_rows(const Tensor& a, int64_t i, const Tensor& b, int64_t j) {
  double s = 0.0;
  for (int64_t c = 0; c < a.cols(); ++c) {
    double d = a.at(i, c) - b.at(j, c);
    s += d * d;
  }
  return s;
}

double rbf(double r2, double var, double ls) {
  return var * std::exp(-r2 / (2.0 * ls * ls));
}

}  // namespace

KernelSpec resolve_kernel(const KernelSpec& spec, SeededRng& rng) {
  KernelSpec out = spec;
  switch (spec.kind) {
    case KernelKind::RbfFixed:
    case KernelKind::LinearPeriodic:
      break;
    case KernelKind::RbfSampled:
      if (!(spec.lengthscale_hi > spec.lengthscale_lo) || spec.lengthscale_lo <= 0.0)
        throw ConfigError("kernel: rbf_sampled needs 0 < lo < hi");
      out.lengthscale = rng.uniform(spec.lengthscale_lo, spec.lengthscale_hi);
      out.kind = KernelKind::RbfFixed;
      break;
    case KernelKind::SumOfTwoRbf:
      if (!(spec.lengthscale_hi > spec.lengthscale_lo) ||
          !(spec.lengthscale2_hi > spec.lengthscale2_lo) ||
          spec.lengthscale_lo <= 0.0 || spec.lengthscale2_lo <= 0.0)
        throw ConfigError("kernel: sum_of_two_rbf needs valid ranges");
      out.lengthscale = rng.uniform(spec.lengthscale_lo, spec.lengthscale_hi);
      out.lengthscale2 = rng.uniform(spec.lengthscale2_lo, spec.lengthscale2_hi);
      break;
  }
  return out;
}

Tensor kernel_matrix(const Tensor& a, const Tensor& b, const KernelSpec& spec) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
    throw DimensionError("kernel_matrix: input dims disagree");
  if (spec.signal_variance <= 0.0)
    throw ConfigError("kernel_matrix: signal_variance must be positive");
  int64_t m = a.rows(), n = b.rows();
  Tensor k = Tensor::zeros({m, n});
  switch (spec.kind) {
    case KernelKind::RbfFixed: {
      if (spec.lengthscale <= 0.0) throw ConfigError("kernel_matrix: lengthscale <= 0");
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
          k.at(i, j) = rbf(sqdist_rows(a, i, b, j), spec.signal_variance,
                           spec.lengthscale);
      break;
    }
    case KernelKind::SumOfTwoRbf: {
      if (spec.lengthscale <= 0.0 || spec.lengthscale2 <= 0.0)
        throw ConfigError("kernel_matrix: unresolved sum_of_two_rbf lengthscales");
      double half = 0.5 * spec.signal_variance;
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double r2 = sqdist_rows(a, i, b, j);
          k.at(i, j) = rbf(r2, half, spec.lengthscale) + rbf(r2, half, spec.lengthscale2);
        }
      break;
    }
    case KernelKind::LinearPeriodic: {
      if (a.cols() != 1)
        throw ConfigError("kernel_matrix: linear_periodic requires 1-d inputs");
      if (spec.period <= 0.0 || spec.periodic_lengthscale <= 0.0 || spec.offset < 0.0)
        throw ConfigError("kernel_matrix: bad linear_periodic parameters");
      double s2 = spec.slope * spec.slope;
      double ip2 = 1.0 / (spec.periodic_lengthscale * spec.periodic_lengthscale);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double xi = a.at(i, 0), xj = b.at(j, 0);
          double lin = spec.offset + s2 * xi * xj;
          double sn = std::sin(3.14159265358979323846 * std::abs(xi - xj) / spec.period);
          k.at(i, j) = spec.signal_variance * lin * std::exp(-2.0 * sn * sn * ip2);
        }
      break;
    }
    case KernelKind::RbfSampled:
      throw ContractError("kernel_matrix: rbf_sampled must be resolved first");
  }
  return k;
}

SyntheticDataset sample_dataset(const PriorConfig& cfg, uint64_t seed) {
  if (cfg.input_dim < 1) throw ConfigError("prior: input_dim < 1");
  if (cfg.points_per_dataset < 2) throw ConfigError("prior: points_per_dataset < 2");
  if (cfg.noise_variance < 0.0) throw ConfigError("prior: negative noise_variance");
  SeededRng rng(seed);
  int64_t n = cfg.points_per_dataset, d = cfg.input_dim;

  SyntheticDataset ds;
  ds.x = Tensor::zeros({n, d});
  for (double& v : ds.x.data) v = rng.uniform();

  KernelSpec ks = resolve_kernel(cfg.kernel, rng);
  Tensor k = kernel_matrix(ds.x, ds.x, ks);
  Tensor l = cholesky(k);
  std::vector<double> f = sample_mvn(l, rng);

  double shift = cfg.shift;
  if (cfg.shift_hi > cfg.shift_lo) shift = rng.uniform(cfg.shift_lo, cfg.shift_hi);
  double noise_sd = std::sqrt(cfg.noise_variance);
  ds.y.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    ds.y[static_cast<size_t>(i)] = f[static_cast<size_t>(i)] + noise_sd * rng.normal() + shift;

  if (cfg.input_norm == InputNorm::Zscore) standardize_columns(ds.x);

  for (double v : ds.y)
    if (!std::isfinite(v)) throw NumericError("prior: non-finite target");
  if (!ds.x.all_finite()) throw NumericError("prior: non-finite input");
  return ds;
}

RobustnessKind robustness_kind_from_string(const std::string& s) {
  if (s == "smooth") return RobustnessKind::Smooth;
  if (s == "wiggly") return RobustnessKind::Wiggly;
  if (s == "mixed") return RobustnessKind::Mixed;
  if (s == "all") return RobustnessKind::All;
  throw ConfigError("robustness prior: unknown kind " + s);
}

PriorConfig robustness_prior(RobustnessKind kind) {
  PriorConfig cfg;
  cfg.input_dim = 1;
  cfg.points_per_dataset = 100;
  cfg.noise_variance = 1e-4;
  cfg.shift = 1.0;
  cfg.kernel.signal_variance = 0.01;
  switch (kind) {
    case RobustnessKind::Smooth:
      cfg.kernel.kind = KernelKind::RbfFixed;
      cfg.kernel.lengthscale = 0.25;
      break;
    case RobustnessKind::Wiggly:
      cfg.kernel.kind = KernelKind::RbfFixed;
      cfg.kernel.lengthscale = 0.03;
      break;
    case RobustnessKind::Mixed:
      cfg.kernel.kind = KernelKind::SumOfTwoRbf;
      cfg.kernel.lengthscale_lo = 0.1;
      cfg.kernel.lengthscale_hi = 0.5;
      cfg.kernel.lengthscale2_lo = 0.01;
      cfg.kernel.lengthscale2_hi = 0.04;
      break;
    case RobustnessKind::All:
      throw ContractError("robustness_prior: 'all' resolves per dataset");
  }
  return cfg;
}

SyntheticDataset sample_robustness_prior(RobustnessKind kind, uint64_t seed) {
  if (kind == RobustnessKind::All) {
    SeededRng pick(SeededRng::mix(seed ^ 0xA11ull));
    int64_t c = pick.uniform_int(0, 2);
    kind = c == 0 ? RobustnessKind::Smooth
                  : (c == 1 ? RobustnessKind::Wiggly : RobustnessKind::Mixed);
  }
  return sample_dataset(robustness_prior(kind), seed);
}

PriorConfig linear_periodic_prior() {
  PriorConfig cfg;
  cfg.input_dim = 1;
  cfg.points_per_dataset = 100;
  cfg.noise_variance = 1e-4;
  cfg.shift = 1.0;
  cfg.kernel.kind = KernelKind::LinearPeriodic;
  cfg.kernel.signal_variance = 0.01;
  cfg.kernel.period = 0.2;
  cfg.kernel.slope = 1.0;
  cfg.kernel.offset = 0.1;
  cfg.kernel.periodic_lengthscale = 0.5;
  return cfg;
}

SyntheticDataset sample_linear_periodic_dataset(uint64_t seed) {
  return sample_dataset(linear_periodic_prior(), seed);
}

void standardize_columns(Tensor& x) {
  int64_t n = x.rows(), d = x.cols();
  if (n < 2) throw ContractError("standardize_columns: need at least 2 rows");
  for (int64_t c = 0; c < d; ++c) {
    double mu = 0.0;
    for (int64_t i = 0; i < n; ++i) mu += x.at(i, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double v = x.at(i, c) - mu;
      var += v * v;
    }
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      for (int64_t i = 0; i < n; ++i) x.at(i, c) = 0.0;
    } else {
      for (int64_t i = 0; i < n; ++i) x.at(i, c) = (x.at(i, c) - mu) / sd;
    }
  }
}

void write_dataset_csv(const std::string& path, const SyntheticDataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_dataset_csv: cannot open " + path);
  for (int64_t c = 0; c < ds.dim(); ++c) out << "x" << c << ",";
  out << "y\n";
  char buf[32];
  for (int64_t i = 0; i < ds.n(); ++i) {
    for (int64_t c = 0; c < ds.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x.at(i, c));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", ds.y[static_cast<size_t>(i)]);
    out << buf << "\n";
  }
}

SyntheticDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("load_dataset_csv: empty file");
  int64_t d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.empty() || cols.back() != "y")
      throw ParseError("load_dataset_csv: header must end with y");
    d = static_cast<int64_t>(cols.size()) - 1;
    for (int64_t c = 0; c < d; ++c)
      if (cols[static_cast<size_t>(c)] != "x" + std::to_string(c))
        throw ParseError("load_dataset_csv: bad header column " +
                         cols[static_cast<size_t>(c)]);
  }
  std::vector<double> xs, ys;
  int64_t rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("load_dataset_csv: bad number at line " +
                         std::to_string(line_no));
      }
    }
    if (static_cast<int64_t>(vals.size()) != d + 1)
      throw ParseError("load_dataset_csv: wrong column count at line " +
                       std::to_string(line_no));
    for (int64_t c = 0; c < d; ++c) xs.push_back(vals[static_cast<size_t>(c)]);
    ys.push_back(vals.back());
    ++rows;
  }
  SyntheticDataset ds;
  ds.x = Tensor::matrix(rows, d, std::move(xs));
  ds.y = std::move(ys);
  return ds;
}

}  // namespace pfn
