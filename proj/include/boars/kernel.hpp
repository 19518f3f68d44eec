#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "boars/grid.hpp"

namespace boars {

enum class KernelKind { Rbf, Periodic, Deep };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Periodic: return "periodic";
    case KernelKind::Deep: return "deep";
  }
  return "unknown";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "rbf") return KernelKind::Rbf;
  if (s == "periodic") return KernelKind::Periodic;
  if (s == "deep") return KernelKind::Deep;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind '" + s + "'");
}

/// Stationary covariance on feature vectors, parameterized in log space.
///
///   Rbf:      [log s2, log theta_1 .. log theta_d]
///             k = s2 * exp(-0.5 * sum_m (z_m - z'_m)^2 / theta_m^2)
///   Periodic: [log s2, log ell, log period]
///             k = s2 * exp(-2 * sum_m sin^2(pi * (z_m - z'_m) / period) / ell^2)
///
/// The periodic form sums over coordinates (a product of 1-D periodic
/// kernels); in one dimension it is the usual exp-sin^2 kernel.
struct StationaryKernel {
  KernelKind kind = KernelKind::Rbf;
  Vector log_params;

  static StationaryKernel rbf(int dim, double variance = 1.0, double lengthscale = 1.0) {
    require(dim >= 1, ErrorCode::InvalidArgument, "rbf kernel needs dim >= 1");
    StationaryKernel k{KernelKind::Rbf, Vector::Constant(dim + 1, std::log(lengthscale))};
    k.log_params[0] = std::log(variance);
    return k;
  }

  static StationaryKernel periodic(double variance = 1.0, double lengthscale = 1.0,
                                   double period = 1.0) {
    StationaryKernel k{KernelKind::Periodic, Vector(3)};
    k.log_params << std::log(variance), std::log(lengthscale), std::log(period);
    return k;
  }

  double variance() const { return std::exp(log_params[0]); }

  /// Input dimension the kernel accepts; 0 means any (isotropic).
  int input_dim() const {
    return kind == KernelKind::Rbf ? static_cast<int>(log_params.size()) - 1 : 0;
  }

  void check_dim(Eigen::Index d) const {
    if (kind == KernelKind::Rbf)
      require(d == input_dim(), ErrorCode::DimensionMismatch,
              "rbf kernel expects " + std::to_string(input_dim()) + " inputs, got " +
                  std::to_string(d));
  }

  double operator()(const Vector& a, const Vector& b) const {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "kernel inputs differ in length");
    check_dim(a.size());
    const double s2 = variance();
    if (kind == KernelKind::Rbf) {
      const Vector theta = log_params.tail(a.size()).array().exp();
      return s2 * std::exp(-0.5 * ((a - b).array() / theta.array()).square().sum());
    }
    const double ell = std::exp(log_params[1]);
    const double period = std::exp(log_params[2]);
    const double f = std::numbers::pi / period;
    double acc = 0.0;
    for (Eigen::Index m = 0; m < a.size(); ++m) {
      const double s = std::sin(f * (a[m] - b[m]));
      acc += s * s;
    }
    return s2 * std::exp(-2.0 * acc / (ell * ell));
  }

  /// Covariance between the rows of `a` and the rows of `b`.
  Matrix cross(const Matrix& a, const Matrix& b) const {
    require(a.cols() == b.cols(), ErrorCode::DimensionMismatch, "kernel inputs differ in width");
    check_dim(a.cols());
    const double s2 = variance();
    if (kind == KernelKind::Rbf) {
      const Eigen::RowVectorXd inv_theta = (-log_params.tail(a.cols()).array()).exp().transpose();
      const Matrix ua = a.array().rowwise() * inv_theta.array();
      const Matrix ub = b.array().rowwise() * inv_theta.array();
      Matrix d2 = sq_dist(ua, ub);
      return s2 * (-0.5 * d2.array()).exp();
    }
    const double ell = std::exp(log_params[1]);
    return s2 * (-2.0 * periodic_sin2(a, b).array() / (ell * ell)).exp();
  }

  /// sum_m sin^2(f (a_im - b_jm)) via the angle-difference identity, so the
  /// pairwise work is three matrix products.
  Matrix periodic_sin2(const Matrix& a, const Matrix& b) const {
    const double f = std::numbers::pi / std::exp(log_params[2]);
    const Eigen::ArrayXXd sa = (f * a.array()).sin(), ca = (f * a.array()).cos();
    const Eigen::ArrayXXd sb = (f * b.array()).sin(), cb = (f * b.array()).cos();
    Matrix out = sa.square().matrix() * cb.square().matrix().transpose();
    out.noalias() += ca.square().matrix() * sb.square().matrix().transpose();
    out.noalias() -= 2.0 * (sa * ca).matrix() * (sb * cb).matrix().transpose();
    return out.cwiseMax(0.0);
  }

  Matrix gram(const Matrix& z) const {
    Matrix k = cross(z, z);
    // Exact symmetry and an exact s2 diagonal regardless of rounding in sq_dist.
    const double s2 = variance();
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      k(i, i) = s2;
      for (Eigen::Index j = 0; j < i; ++j) k(j, i) = k(i, j);
    }
    return k;
  }

  /// Given g = dL/dK (symmetric) and the Gram matrix k = gram(z), returns
  /// dL/d(log_params) and writes dL/dz into `dz` when non-null.
  Vector backward(const Matrix& z, const Matrix& k, const Matrix& g, Matrix* dz) const {
    Vector grad = Vector::Zero(log_params.size());
    const Matrix a = g.cwiseProduct(k);
    grad[0] = a.sum();
    if (kind == KernelKind::Rbf) {
      const Eigen::RowVectorXd inv_theta = (-log_params.tail(z.cols()).array()).exp().transpose();
      const Matrix u = z.array().rowwise() * inv_theta.array();
      // Direct pairwise differences: the expanded forms cancel badly once
      // length scales get small.
      Matrix du = Matrix::Zero(z.rows(), z.cols());
      for (Eigen::Index m = 0; m < z.cols(); ++m) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < z.rows(); ++j) {
          const double uj = u(j, m);
          for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double w = a(i, j) * (u(i, m) - uj);
            acc += w * (u(i, m) - uj);
            du(i, m) += w;
          }
        }
        grad[1 + m] = acc;
      }
      if (dz) *dz = -2.0 * (du.array().rowwise() * inv_theta.array()).matrix();
      return grad;
    }
    const double ell = std::exp(log_params[1]);
    const double f = std::numbers::pi / std::exp(log_params[2]);
    const double inv_l2 = 1.0 / (ell * ell);
    // u = f (z_i - z_j) per coordinate; sin(2u) and u sin(2u) split into
    // per-point factors.
    const Eigen::ArrayXXd x = f * z.array();
    const Eigen::ArrayXXd s2x = (2.0 * x).sin(), c2x = (2.0 * x).cos();
    const Matrix ac = a * c2x.matrix();
    const Matrix as = a * s2x.matrix();
    grad[1] = 4.0 * inv_l2 * a.cwiseProduct(periodic_sin2(z, z)).sum();
    grad[2] = 2.0 * inv_l2 * 2.0 *
              ((x * s2x * ac.array()).sum() - (x * c2x * as.array()).sum());
    if (dz) *dz = (2.0 * -2.0 * inv_l2 * f) * (s2x * ac.array() - c2x * as.array()).matrix();
    return grad;
  }

  static Matrix sq_dist(const Matrix& a, const Matrix& b) {
    Matrix d2 = Matrix::Zero(a.rows(), b.rows());
    for (Eigen::Index m = 0; m < a.cols(); ++m)
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        const double bj = b(j, m);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const double d = a(i, m) - bj;
          d2(i, j) += d * d;
        }
      }
    return d2;
  }
};

/// Fully connected embedding: tanh hidden layers, linear output layer.
struct FeatureNet {
  std::vector<int> widths;  // input, hidden..., output
  std::vector<Matrix> weights;  // weights[l] is widths[l+1] x widths[l]
  std::vector<Vector> biases;

  static FeatureNet init(std::vector<int> widths, std::uint64_t seed) {
    require(widths.size() >= 2, ErrorCode::InvalidArgument, "feature net needs >= 2 widths");
    for (int w : widths) require(w >= 1, ErrorCode::InvalidArgument, "layer widths must be >= 1");
    FeatureNet net;
    net.widths = std::move(widths);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
      const int in = net.widths[l];
      const int out = net.widths[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Matrix w(out, in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
      Vector b(out);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    return net;
  }

  static FeatureNet identity(int dim) {
    FeatureNet net;
    net.widths = {dim, dim};
    net.weights.push_back(Matrix::Identity(dim, dim));
    net.biases.push_back(Vector::Zero(dim));
    return net;
  }

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::size_t layers() const { return weights.size(); }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void validate() const {
    require(weights.size() + 1 == widths.size() && biases.size() == weights.size(),
            ErrorCode::InvalidArgument, "feature net layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      require(weights[l].rows() == widths[l + 1] && weights[l].cols() == widths[l] &&
                  biases[l].size() == widths[l + 1],
              ErrorCode::InvalidArgument, "feature net weight shape mismatch at layer " + std::to_string(l));
    }
  }

  /// Forward pass over rows of `x`. Hidden activations are kept in
  /// `acts` (acts[0] = x) when requested for backprop.
  Matrix forward(const Matrix& x, std::vector<Matrix>* acts = nullptr) const {
    require(x.cols() == input_dim(), ErrorCode::DimensionMismatch,
            "feature net expects width " + std::to_string(input_dim()) + ", got " +
                std::to_string(x.cols()));
    Matrix h = x;
    if (acts) {
      acts->clear();
      acts->push_back(h);
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Matrix pre = h * weights[l].transpose();
      pre.rowwise() += biases[l].transpose();
      if (l + 1 < weights.size()) {
        h = pre.array().tanh();
        if (acts) acts->push_back(h);
      } else {
        h = std::move(pre);
      }
    }
    return h;
  }

  /// Backprop of dL/d(output) into a flat parameter gradient laid out as
  /// [W0 (column-major), b0, W1, b1, ...].
  Vector backward(const std::vector<Matrix>& acts, const Matrix& d_out) const {
    Vector grad(param_count());
    std::vector<Eigen::Index> offsets(weights.size());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      offsets[l] = off;
      off += weights[l].size() + biases[l].size();
    }
    Matrix delta = d_out;
    for (std::size_t l = weights.size(); l-- > 0;) {
      const Matrix& input = acts[l];
      const Matrix dw = delta.transpose() * input;
      const Vector db = delta.colwise().sum().transpose();
      Eigen::Map<Matrix>(grad.data() + offsets[l], dw.rows(), dw.cols()) = dw;
      grad.segment(offsets[l] + dw.size(), db.size()) = db;
      if (l > 0) {
        Matrix dh = delta * weights[l];
        delta = dh.array() * (1.0 - input.array().square());
      }
    }
    return grad;
  }

  Vector flat_params() const {
    Vector p(param_count());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      p.segment(off, weights[l].size()) = Eigen::Map<const Vector>(weights[l].data(), weights[l].size());
      off += weights[l].size();
      p.segment(off, biases[l].size()) = biases[l];
      off += biases[l].size();
    }
    return p;
  }

  void set_flat_params(const Vector& p) {
    require(p.size() == param_count(), ErrorCode::DimensionMismatch, "feature net parameter count mismatch");
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] = Eigen::Map<const Matrix>(p.data() + off, weights[l].rows(), weights[l].cols());
      off += weights[l].size();
      biases[l] = p.segment(off, biases[l].size());
      off += biases[l].size();
    }
  }
};

inline Vector embed(const FeatureNet& net, const Vector& patch) {
  require(patch.size() == net.input_dim(), ErrorCode::DimensionMismatch,
          "patch width " + std::to_string(patch.size()) + " does not match net input " +
              std::to_string(net.input_dim()));
  return net.forward(patch.transpose()).row(0).transpose();
}

/// Complete covariance specification. For Deep, `base` acts on the net's
/// output; otherwise it acts on raw inputs and `net` is empty.
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  StationaryKernel base;
  std::optional<FeatureNet> net;

  Eigen::Index param_count() const {
    return base.log_params.size() + (net ? net->param_count() : 0);
  }

  Vector flat_params() const {
    Vector p(param_count());
    p.head(base.log_params.size()) = base.log_params;
    if (net) p.tail(net->param_count()) = net->flat_params();
    return p;
  }

  void set_flat_params(const Vector& p) {
    require(p.size() == param_count(), ErrorCode::DimensionMismatch, "kernel parameter count mismatch");
    base.log_params = p.head(base.log_params.size());
    if (net) net->set_flat_params(p.tail(net->param_count()));
  }

  Matrix features(const Matrix& x) const { return net ? net->forward(x) : x; }

  double operator()(const Vector& a, const Vector& b) const {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "kernel inputs differ in length");
    if (!net) return base(a, b);
    return base(embed(*net, a), embed(*net, b));
  }
};

struct KernelOptions {
  KernelKind deep_base = KernelKind::Rbf;
  std::vector<int> hidden = {64, 32};
  int latent_dim = 2;
  double variance = 1.0;
  double lengthscale = 1.0;
  double period = 1.0;
};

inline KernelSpec make_kernel(KernelKind kind, int input_dim, std::uint64_t seed,
                              const KernelOptions& opts = {}) {
  require(input_dim >= 1, ErrorCode::InvalidArgument, "input dimension must be >= 1");
  auto stationary = [&](KernelKind k, int dim) {
    return k == KernelKind::Rbf ? StationaryKernel::rbf(dim, opts.variance, opts.lengthscale)
                                : StationaryKernel::periodic(opts.variance, opts.lengthscale, opts.period);
  };
  switch (kind) {
    case KernelKind::Rbf:
    case KernelKind::Periodic:
      return {kind, stationary(kind, input_dim), std::nullopt};
    case KernelKind::Deep: {
      require(opts.deep_base != KernelKind::Deep, ErrorCode::InvalidArgument,
              "deep kernel base must be rbf or periodic");
      std::vector<int> widths{input_dim};
      widths.insert(widths.end(), opts.hidden.begin(), opts.hidden.end());
      widths.push_back(opts.latent_dim);
      return {kind, stationary(opts.deep_base, opts.latent_dim), FeatureNet::init(widths, seed)};
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown kernel kind");
}

inline nlohmann::json to_json(const KernelSpec& k) {
  nlohmann::json j;
  j["kind"] = to_string(k.kind);
  j["base"] = {{"kind", to_string(k.base.kind)},
               {"log_params", std::vector<double>(k.base.log_params.data(),
                                                  k.base.log_params.data() + k.base.log_params.size())}};
  if (k.net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < k.net->layers(); ++l) {
      const Matrix& w = k.net->weights[l];
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index c = 0; c < w.cols(); ++c) row[static_cast<std::size_t>(c)] = w(r, c);
        rows.push_back(row);
      }
      const Vector& b = k.net->biases[l];
      layers.push_back({{"weights", rows}, {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    j["net"] = {{"widths", k.net->widths}, {"layers", layers}};
  }
  return j;
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  try {
    KernelSpec k;
    k.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    k.base.kind = kernel_kind_from_string(j.at("base").at("kind").get<std::string>());
    const auto lp = j.at("base").at("log_params").get<std::vector<double>>();
    k.base.log_params = Eigen::Map<const Vector>(lp.data(), static_cast<Eigen::Index>(lp.size()));
    if (j.contains("net")) {
      FeatureNet net;
      net.widths = j.at("net").at("widths").get<std::vector<int>>();
      for (const auto& layer : j.at("net").at("layers")) {
        const auto rows = layer.at("weights").get<std::vector<std::vector<double>>>();
        Matrix w(static_cast<Eigen::Index>(rows.size()),
                 rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          require(static_cast<Eigen::Index>(rows[r].size()) == w.cols(), ErrorCode::Format, "ragged weight matrix");
          for (std::size_t c = 0; c < rows[r].size(); ++c)
            w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        const auto b = layer.at("bias").get<std::vector<double>>();
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())));
      }
      net.validate();
      k.net = std::move(net);
    }
    return k;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed kernel checkpoint: ") + e.what());
  }
}

}  // namespace boars
