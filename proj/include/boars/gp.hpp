#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "boars/kernel.hpp"

namespace boars {

struct TrainConfig {
  int steps = 200;
  double learning_rate = 0.1;      // kernel hyperparameters
  double net_learning_rate = 0.01; // feature-net weights of deep kernels
  double jitter = 1e-6;
  double max_jitter = 1e-2;
  std::uint64_t seed = 0;

  void validate() const {
    require(steps >= 1, ErrorCode::InvalidArgument, "training steps must be >= 1");
    require(learning_rate > 0.0 && net_learning_rate > 0.0, ErrorCode::InvalidArgument,
            "learning rates must be positive");
    require(jitter > 0.0 && max_jitter >= jitter, ErrorCode::InvalidArgument,
            "jitter must be positive and not exceed max_jitter");
  }
};

namespace detail {

// Flushes subnormals to zero for the guard's lifetime. Collapsed length
// scales fill kernel matrices with exp(-700)-sized entries, and subnormal
// arithmetic is an order of magnitude slower on x86.
class FlushSubnormals {
 public:
#if defined(__SSE2__)
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }  // FTZ | DAZ
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
 public:
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;
};

// Index of the first leading minor that is not positive definite.
inline Eigen::Index failing_minor(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return j + 1;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return 0;
}

}  // namespace detail

struct Factorization {
  Matrix lower;
  double jitter = 0.0;
};

/// Cholesky of k + jitter*I. With escalation enabled the jitter grows 10x
/// per failure up to `max_jitter`.
inline Factorization factorize(const Matrix& k, double jitter, double max_jitter) {
  const Eigen::Index n = k.rows();
  for (double j = jitter;; j *= 10.0) {
    Matrix kj = k;
    kj.diagonal().array() += j;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite())
      return {llt.matrixL(), j};
    if (j * 10.0 > max_jitter * (1.0 + 1e-12)) {
      throw Error(ErrorCode::Factorization,
                  "covariance not positive definite at jitter " + std::to_string(j) +
                      " (leading minor " + std::to_string(detail::failing_minor(kj)) + " of " +
                      std::to_string(n) + ")");
    }
  }
}

inline double nll_from_factor(const Factorization& f, const Vector& y) {
  const Vector v = f.lower.triangularView<Eigen::Lower>().solve(y);
  const double n = static_cast<double>(y.size());
  return 0.5 * v.squaredNorm() + f.lower.diagonal().array().log().sum() +
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

/// Negative log marginal likelihood of a zero-mean GP:
/// 0.5 y^T (K + jI)^-1 y + 0.5 log det(K + jI) + 0.5 n log(2 pi).
inline double nll(const KernelSpec& kernel, const Matrix& x, const Vector& y, double jitter) {
  const detail::FlushSubnormals ftz;
  require(x.rows() >= 1 && x.rows() == y.size(), ErrorCode::DimensionMismatch,
          "nll needs matching, non-empty inputs and outputs");
  const Matrix k = kernel.base.gram(kernel.features(x));
  return nll_from_factor(factorize(k, jitter, jitter), y);
}

struct NllGradient {
  double value = 0.0;
  Vector grad;  // with respect to KernelSpec::flat_params()
  double jitter = 0.0;
};

/// Value and analytic gradient of the nll with respect to every log
/// hyperparameter and, for deep kernels, every net weight.
inline NllGradient nll_with_gradient(const KernelSpec& kernel, const Matrix& x, const Vector& y,
                                     double jitter, double max_jitter) {
  const detail::FlushSubnormals ftz;
  require(x.rows() >= 1 && x.rows() == y.size(), ErrorCode::DimensionMismatch,
          "nll needs matching, non-empty inputs and outputs");
  std::vector<Matrix> acts;
  const Matrix z = kernel.net ? kernel.net->forward(x, &acts) : x;
  const Matrix k = kernel.base.gram(z);
  const Factorization f = factorize(k, jitter, max_jitter);

  const auto lower = f.lower.triangularView<Eigen::Lower>();
  const Eigen::Index n = y.size();
  Matrix linv = Matrix::Identity(n, n);
  lower.solveInPlace(linv);
  Matrix kinv = Matrix::Zero(n, n);
  kinv.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose());
  kinv.triangularView<Eigen::StrictlyUpper>() = kinv.transpose();
  const Vector alpha = kinv * y;
  // dL/dK = 0.5 (K^-1 - alpha alpha^T)
  const Matrix g = 0.5 * (kinv - alpha * alpha.transpose());

  NllGradient out;
  out.jitter = f.jitter;
  out.value = 0.5 * y.dot(alpha) + f.lower.diagonal().array().log().sum() +
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  out.grad.resize(kernel.param_count());
  Matrix dz;
  const Vector g_base = kernel.base.backward(z, k, g, kernel.net ? &dz : nullptr);
  out.grad.head(g_base.size()) = g_base;
  if (kernel.net) out.grad.tail(kernel.net->param_count()) = kernel.net->backward(acts, dz);
  return out;
}

/// A conditioned GP: hyperparameters plus the factorization of the
/// training covariance. Outputs are centered by their training mean.
struct GPModel {
  KernelSpec kernel;
  Matrix train_x;
  Vector train_y;
  double y_mean = 0.0;
  double jitter = 0.0;
  Matrix train_features;
  Matrix chol;
  Vector alpha;
  double nll = 0.0;
  int steps_run = 0;
};

inline GPModel condition_gp(KernelSpec kernel, const Matrix& x, const Vector& y, double jitter,
                            double max_jitter, bool center = true) {
  const detail::FlushSubnormals ftz;
  require(x.rows() >= 1 && x.rows() == y.size(), ErrorCode::DimensionMismatch,
          "training inputs and outputs differ in count");
  require(y.allFinite() && x.allFinite(), ErrorCode::NonFinite, "training data is not finite");
  GPModel m;
  m.kernel = std::move(kernel);
  m.train_x = x;
  m.train_y = y;
  m.y_mean = center ? y.mean() : 0.0;
  m.train_features = m.kernel.features(x);
  const Factorization f = factorize(m.kernel.base.gram(m.train_features), jitter, max_jitter);
  m.chol = f.lower;
  m.jitter = f.jitter;
  const Vector yc = y.array() - m.y_mean;
  m.alpha = m.chol.triangularView<Eigen::Lower>().solve(yc);
  m.nll = 0.5 * m.alpha.squaredNorm() + m.chol.diagonal().array().log().sum() +
          0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  m.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(m.alpha);
  return m;
}

/// Adam on the nll over log hyperparameters (and net weights), starting
/// from `init`. Returns the best iterate seen, conditioned on the data.
inline GPModel fit_gp(const Matrix& x, const Vector& y, KernelSpec init, const TrainConfig& config) {
  const detail::FlushSubnormals ftz;
  config.validate();
  require(x.rows() >= 2, ErrorCode::InvalidArgument, "fit_gp needs at least two samples");
  require(x.rows() == y.size(), ErrorCode::DimensionMismatch, "training inputs and outputs differ in count");
  require(y.allFinite(), ErrorCode::NonFinite, "training outputs are not finite");
  const Vector yc = y.array() - y.mean();

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  KernelSpec spec = std::move(init);
  Vector params = spec.flat_params();
  Vector m1 = Vector::Zero(params.size());
  Vector m2 = Vector::Zero(params.size());
  double jitter = config.jitter;
  double best_value = std::numeric_limits<double>::infinity();
  Vector lr = Vector::Constant(params.size(), config.learning_rate);
  if (spec.net) lr.tail(spec.net->param_count()).setConstant(config.net_learning_rate);
  Vector best_params = params;

  for (int step = 1; step <= config.steps; ++step) {
    spec.set_flat_params(params);
    NllGradient ng;
    try {
      ng = nll_with_gradient(spec, x, yc, jitter, config.max_jitter);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at training step " + std::to_string(step));
    }
    jitter = ng.jitter;
    if (!std::isfinite(ng.value) || !ng.grad.allFinite())
      throw Error(ErrorCode::NonFinite, "non-finite loss at training step " + std::to_string(step));
    if (ng.value < best_value) {
      best_value = ng.value;
      best_params = params;
    }
    m1 = beta1 * m1 + (1.0 - beta1) * ng.grad;
    m2 = beta2 * m2 + (1.0 - beta2) * ng.grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    params -= (lr.array() * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
  }

  spec.set_flat_params(params);
  GPModel model;
  bool final_ok = params.allFinite();
  if (final_ok) {
    try {
      model = condition_gp(spec, x, y, jitter, config.max_jitter);
      final_ok = std::isfinite(model.nll) && model.nll <= best_value;
    } catch (const Error&) {
      final_ok = false;
    }
  }
  if (!final_ok) {
    spec.set_flat_params(best_params);
    model = condition_gp(spec, x, y, jitter, config.max_jitter);
  }
  model.steps_run = config.steps;
  return model;
}

inline GPModel fit_gp(const Matrix& x, const Vector& y, KernelKind kind, const TrainConfig& config,
                      const KernelOptions& opts = {}) {
  return fit_gp(x, y, make_kernel(kind, static_cast<int>(x.cols()), config.seed, opts), config);
}

struct Posterior {
  Vector mean;
  Vector variance;      // clamped at zero
  Vector raw_variance;  // before clamping
};

/// Predictive mean k*^T alpha (plus the training mean) and variance
/// k(x*, x*) - k*^T (K + jI)^-1 k* for each row of `xstar`.
inline Posterior posterior(const GPModel& model, const Matrix& xstar) {
  const detail::FlushSubnormals ftz;
  require(xstar.cols() == model.train_x.cols(), ErrorCode::DimensionMismatch,
          "candidate width " + std::to_string(xstar.cols()) + " does not match training width " +
              std::to_string(model.train_x.cols()));
  const Matrix zs = model.kernel.features(xstar);
  const Matrix kstar = model.kernel.base.cross(model.train_features, zs);  // n x m
  Posterior p;
  p.mean = (kstar.transpose() * model.alpha).array() + model.y_mean;
  const Matrix v = model.chol.triangularView<Eigen::Lower>().solve(kstar);
  p.raw_variance = model.kernel.base.variance() - v.colwise().squaredNorm().transpose().array();
  p.variance = p.raw_variance.cwiseMax(0.0);
  return p;
}

}  // namespace boars
