#pragma once

// Shared fixtures and independent oracles. The oracles deliberately avoid
// the library's numerics: plain loops, long double accumulation, dense
// inverses.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "boars/gp.hpp"
#include "boars/grid.hpp"

namespace testing_support {

using boars::Matrix;
using boars::RowMatrix;
using boars::Vector;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("boars_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Grid whose values are exactly representable as float32.
inline boars::SpectralGrid float_grid(int h, int w, int len, std::uint64_t seed, nlohmann::json meta = nlohmann::json::object()) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  RowMatrix image(h, w);
  for (Eigen::Index i = 0; i < image.size(); ++i) image.data()[i] = u(rng);
  std::vector<double> spectra(static_cast<std::size_t>(h * w * len));
  for (auto& v : spectra) v = u(rng);
  Vector bias(len);
  for (int l = 0; l < len; ++l) bias[l] = -1.0 + 2.0 * l / std::max(1, len - 1);
  return boars::SpectralGrid(std::move(image), std::move(spectra), std::move(bias), std::move(meta));
}

// Direct sliding-window SSIM: raw sums in long double, variance from
// E[x^2] - E[x]^2 with the (n-1) correction.
inline double ssim_oracle(const Vector& x, const Vector& y, int win = 7, double k1 = 0.01, double k2 = 0.03,
                          double range = 1.0) {
  const long double c1 = (k1 * range) * (k1 * range);
  const long double c2 = (k2 * range) * (k2 * range);
  const long n = static_cast<long>(x.size());
  long double total = 0.0L;
  for (long s = 0; s + win <= n; ++s) {
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (long t = s; t < s + win; ++t) {
      const long double a = x[t], b = y[t];
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
    }
    const long double nw = win;
    const long double mx = sx / nw, my = sy / nw;
    const long double vx = (sxx / nw - mx * mx) * nw / (nw - 1);
    const long double vy = (syy / nw - my * my) * nw / (nw - 1);
    const long double cxy = (sxy / nw - mx * my) * nw / (nw - 1);
    total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return static_cast<double>(total / static_cast<long double>(n - win + 1));
}

inline Vector minmax(const Vector& v) { return (v.array() - v.minCoeff()) / (v.maxCoeff() - v.minCoeff()); }

// Kernel written out per pair, straight from its definition.
inline double kernel_oracle(const boars::KernelSpec& spec, const Vector& a0, const Vector& b0) {
  Vector a = a0, b = b0;
  if (spec.net) {
    for (const Vector* src : {&a0, &b0}) {
      Vector h = *src;
      for (std::size_t l = 0; l < spec.net->weights.size(); ++l) {
        const Matrix& w = spec.net->weights[l];
        Vector next(w.rows());
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
          double acc = spec.net->biases[l][r];
          for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * h[c];
          next[r] = l + 1 < spec.net->weights.size() ? std::tanh(acc) : acc;
        }
        h = next;
      }
      (src == &a0 ? a : b) = h;
    }
  }
  const Vector& p = spec.base.log_params;
  const double s2 = std::exp(p[0]);
  double acc = 0.0;
  if (spec.base.kind == boars::KernelKind::Rbf) {
    for (Eigen::Index m = 0; m < a.size(); ++m) {
      const double d = (a[m] - b[m]) / std::exp(p[1 + m]);
      acc += d * d;
    }
    return s2 * std::exp(-0.5 * acc);
  }
  const double ell = std::exp(p[1]), period = std::exp(p[2]);
  for (Eigen::Index m = 0; m < a.size(); ++m) {
    const double s = std::sin(std::numbers::pi * (a[m] - b[m]) / period);
    acc += s * s;
  }
  return s2 * std::exp(-2.0 * acc / (ell * ell));
}

inline Matrix gram_oracle(const boars::KernelSpec& spec, const Matrix& x1, const Matrix& x2) {
  Matrix k(x1.rows(), x2.rows());
  for (Eigen::Index i = 0; i < x1.rows(); ++i)
    for (Eigen::Index j = 0; j < x2.rows(); ++j) k(i, j) = kernel_oracle(spec, x1.row(i).transpose(), x2.row(j).transpose());
  return k;
}

struct DenseGp {
  Vector mean;
  Vector variance;
  double nll = 0.0;
};

// Posterior and nll from an explicit inverse and LU determinant.
inline DenseGp dense_gp_oracle(const boars::KernelSpec& spec, const Matrix& x, const Vector& y, double jitter,
                               const Matrix& xs) {
  const Eigen::Index n = x.rows();
  Matrix k = gram_oracle(spec, x, x);
  k += jitter * Matrix::Identity(n, n);
  const Eigen::FullPivLU<Matrix> lu(k);
  const Matrix kinv = lu.inverse();
  const double ybar = y.mean();
  const Vector yc = y.array() - ybar;
  const Matrix ks = gram_oracle(spec, x, xs);
  DenseGp out;
  out.mean = (ks.transpose() * kinv * yc).array() + ybar;
  out.variance.resize(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    out.variance[i] = kernel_oracle(spec, xs.row(i).transpose(), xs.row(i).transpose()) -
                      ks.col(i).dot(kinv * ks.col(i));
  out.nll = 0.5 * yc.dot(kinv * yc) + 0.5 * std::log(lu.determinant()) + 0.5 * n * std::log(2 * std::numbers::pi);
  return out;
}

inline double rel_err(double got, double want, double floor) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

// Random kernel of the given kind on d-dimensional inputs, with
// hyperparameters kept in a well-conditioned range.
inline boars::KernelSpec random_kernel(boars::KernelKind kind, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  boars::KernelOptions opts;
  opts.hidden = {5};
  opts.latent_dim = 2;
  boars::KernelSpec k = boars::make_kernel(kind, d, rng());
  if (kind == boars::KernelKind::Deep) k = boars::make_kernel(kind, d, rng(), opts);
  k.base.log_params[0] = std::log(0.5 + u(rng));
  for (Eigen::Index i = 1; i < k.base.log_params.size(); ++i) k.base.log_params[i] = std::log(0.4 + 0.8 * u(rng));
  if (k.base.kind == boars::KernelKind::Periodic) k.base.log_params[2] = std::log(1.5 + u(rng));
  return k;
}

// Sets the base length scales to `factor` times the median pairwise distance
// of x as the kernel sees it (feature space for deep kernels, the summed sin²
// distance for periodic ones), so the Gram matrix is neither singular nor the
// identity whatever the dimension or the net does to the inputs.
inline void spread_lengthscales(boars::KernelSpec& k, const Matrix& x, double factor = 1.0) {
  const Matrix z = k.features(x);
  const bool periodic = k.base.kind == boars::KernelKind::Periodic;
  const double period = periodic ? std::exp(k.base.log_params[2]) : 1.0;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) {
      const Eigen::ArrayXd diff = (z.row(i) - z.row(j)).transpose().array();
      d.push_back(periodic ? std::sqrt(2.0 * (std::numbers::pi * diff / period).sin().square().sum())
                           : std::sqrt(diff.square().sum()));
    }
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double ls = std::log(factor * d[d.size() / 2]);
  if (periodic)
    k.base.log_params[1] = ls;
  else
    k.base.log_params.tail(k.base.log_params.size() - 1).setConstant(ls);
}

}  // namespace testing_support
