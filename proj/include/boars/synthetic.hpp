#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "boars/grid.hpp"

namespace boars {

/// Parameters of the synthetic hysteresis-loop world.
///
/// Each pixel carries a butterfly amplitude loop sampled over a triangular
/// bias sweep (first half ascending, second half descending). The
/// asymmetry field a in [0, 1] suppresses the positive-bias lobe and
/// imprints the loop; a = 0 gives forward(V) == reverse(-V).
struct SyntheticConfig {
  int height = 50;
  int width = 50;
  int spectrum_len = 64;
  double bias_min = -4.0;
  double bias_max = 4.0;
  double correlation = 0.2;   // weight of the asymmetry field in the image
  double smoothness = 5.0;    // Gaussian correlation length of latent fields, px
  double switching_width = 0.6;
  double coercive_min = 1.0;
  double coercive_max = 2.2;
  double amplitude_min = 0.5;
  double amplitude_max = 1.5;
  double skew_strength = 0.7;  // lobe suppression at a = 1
  double imprint = 0.5;        // loop shift at a = 1, fraction of coercive bias
  double asymmetry_contrast = 3.0;  // logistic slope per standard deviation of the seeded asymmetry field; 0 keeps it as is

  std::optional<RowMatrix> asymmetry;  // explicit fields override the seeded ones
  std::optional<RowMatrix> coercive;
  std::optional<RowMatrix> amplitude;

  void validate() const {
    require(height >= 1 && width >= 1, ErrorCode::InvalidArgument, "synthetic grid needs positive dimensions");
    require(spectrum_len >= 4 && spectrum_len % 2 == 0, ErrorCode::InvalidArgument,
            "synthetic spectrum length must be even and >= 4");
    require(bias_max > bias_min, ErrorCode::InvalidArgument, "bias range has zero width");
    require(correlation >= 0.0 && correlation <= 1.0, ErrorCode::InvalidArgument,
            "correlation must lie in [0, 1]");
    require(asymmetry_contrast >= 0.0, ErrorCode::InvalidArgument, "asymmetry contrast must be >= 0");
    require(smoothness > 0.0 && switching_width > 0.0, ErrorCode::InvalidArgument,
            "smoothness and switching width must be positive");
    require(coercive_max >= coercive_min && amplitude_min > 0.0 && amplitude_max >= amplitude_min,
            ErrorCode::InvalidArgument, "invalid coercive or amplitude range");
    auto check = [&](const std::optional<RowMatrix>& f, const char* name) {
      if (!f) return;
      require(f->rows() == height && f->cols() == width, ErrorCode::DimensionMismatch,
              std::string(name) + " field does not match grid dimensions");
      require(f->allFinite(), ErrorCode::NonFinite, std::string(name) + " field is not finite");
    };
    check(asymmetry, "asymmetry");
    check(coercive, "coercive");
    check(amplitude, "amplitude");
    if (asymmetry)
      require(asymmetry->minCoeff() >= 0.0 && asymmetry->maxCoeff() <= 1.0, ErrorCode::InvalidArgument,
              "asymmetry field must lie in [0, 1]");
  }
};

namespace detail {

inline RowMatrix rescale01(const RowMatrix& m) {
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  if (hi <= lo) return RowMatrix::Zero(m.rows(), m.cols());
  return (m.array() - lo) / (hi - lo);
}

/// White noise blurred by a separable Gaussian (clamped borders), rescaled
/// to [0, 1].
inline RowMatrix smooth_field(int h, int w, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix noise(h, w);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);

  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (int t = -radius; t <= radius; ++t)
    taps[static_cast<std::size_t>(t + radius)] = std::exp(-0.5 * t * t / (sigma * sigma));

  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  RowMatrix tmp(h, w), out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0, norm = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const double k = taps[static_cast<std::size_t>(t + radius)];
        acc += k * noise(r, clampi(c + t, 0, w - 1));
        norm += k;
      }
      tmp(r, c) = acc / norm;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0, norm = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const double k = taps[static_cast<std::size_t>(t + radius)];
        acc += k * tmp(clampi(r + t, 0, h - 1), c);
        norm += k;
      }
      out(r, c) = acc / norm;
    }
  return rescale01(out);
}

// Pushes a [0, 1] field toward its extremes around its median, so about
// half the grid becomes a near-symmetric domain.
inline RowMatrix sharpen(const RowMatrix& field, double contrast) {
  if (contrast <= 0.0) return field;
  std::vector<double> v(field.data(), field.data() + field.size());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double median = *mid;
  const double sd = std::sqrt((field.array() - field.mean()).square().mean());
  if (!(sd > 0.0)) return field;
  const RowMatrix logistic =
      (1.0 / (1.0 + (-(field.array() - median) * (contrast / sd)).exp())).matrix();
  return rescale01(logistic);
}

}  // namespace detail

/// Triangular sweep: ascending from bias_min to bias_max, then the same
/// points in reverse order.
inline Vector synthetic_bias(const SyntheticConfig& cfg) {
  const int half = cfg.spectrum_len / 2;
  Vector bias(cfg.spectrum_len);
  for (int i = 0; i < half; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(half - 1);
    bias[i] = cfg.bias_min + (cfg.bias_max - cfg.bias_min) * t;
    bias[cfg.spectrum_len - 1 - i] = bias[i];
  }
  return bias;
}

/// Amplitude loop for one pixel on the sweep returned by synthetic_bias.
inline Vector butterfly_loop(const SyntheticConfig& cfg, const Vector& bias, double asym,
                             double coercive, double amplitude) {
  const int len = static_cast<int>(bias.size());
  const int half = len / 2;
  const double s = cfg.switching_width;
  const double shift = asym * cfg.imprint * coercive;
  Vector out(len);
  for (int i = 0; i < len; ++i) {
    const double v = bias[i];
    const bool ascending = i < half;
    const double x = ascending ? (v - coercive - shift) / s : (v + coercive - shift) / s;
    const double lobe = 1.0 - asym * cfg.skew_strength * 0.5 * (1.0 + std::tanh(v / s));
    out[i] = amplitude * std::abs(std::tanh(x)) * lobe;
  }
  return out;
}

/// Deterministic in (config, seed).
inline SpectralGrid generate_synthetic_grid(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int h = cfg.height, w = cfg.width;
  // Draw every seeded field in a fixed order so explicit overrides don't
  // perturb the others.
  const RowMatrix a_seeded = detail::smooth_field(h, w, cfg.smoothness, rng);
  const RowMatrix other = detail::smooth_field(h, w, cfg.smoothness, rng);
  const RowMatrix vc_seeded = detail::smooth_field(h, w, cfg.smoothness, rng);
  const RowMatrix amp_seeded = detail::smooth_field(h, w, cfg.smoothness, rng);

  const RowMatrix a = cfg.asymmetry ? *cfg.asymmetry : detail::sharpen(a_seeded, cfg.asymmetry_contrast);
  const RowMatrix vc = cfg.coercive
                           ? *cfg.coercive
                           : RowMatrix((cfg.coercive_min + (cfg.coercive_max - cfg.coercive_min) *
                                                                vc_seeded.array()).matrix());
  const RowMatrix amp = cfg.amplitude
                            ? *cfg.amplitude
                            : RowMatrix((cfg.amplitude_min + (cfg.amplitude_max - cfg.amplitude_min) *
                                                                 amp_seeded.array()).matrix());

  const double rho = cfg.correlation;
  RowMatrix image = rho * detail::rescale01(a).array() + (1.0 - rho) * other.array();

  const Vector bias = synthetic_bias(cfg);
  const auto len = static_cast<std::size_t>(cfg.spectrum_len);
  std::vector<double> spectra(static_cast<std::size_t>(h * w) * len);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const Vector loop = butterfly_loop(cfg, bias, a(r, c), vc(r, c), amp(r, c));
      std::copy(loop.data(), loop.data() + loop.size(),
                spectra.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r * w + c) * len));
    }

  nlohmann::json meta = {{"source", "synthetic"},
                         {"seed", seed},
                         {"correlation", cfg.correlation},
                         {"smoothness", cfg.smoothness},
                         {"bias_unit", "V"}};
  return SpectralGrid(std::move(image), std::move(spectra), bias, std::move(meta));
}

/// Latent asymmetry field the generator would use for (config, seed).
inline RowMatrix synthetic_asymmetry(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.asymmetry) return *cfg.asymmetry;
  std::mt19937_64 rng(seed);
  return detail::sharpen(detail::smooth_field(cfg.height, cfg.width, cfg.smoothness, rng),
                         cfg.asymmetry_contrast);
}

}  // namespace boars
