#pragma once

#include <algorithm>
#include <optional>

#include "boars/grid.hpp"

namespace boars {

/// Windowed structural-similarity settings for 1-D signals. Defaults match
/// the usual reference implementation for 1-D input on data in [0, 1].
struct SsimParams {
  int win = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;

  void validate() const {
    require(win >= 3 && win % 2 == 1, ErrorCode::InvalidArgument,
            "ssim window must be odd and >= 3, got " + std::to_string(win));
    require(k1 > 0.0 && k2 > 0.0, ErrorCode::InvalidArgument, "ssim constants must be positive");
    require(data_range > 0.0, ErrorCode::InvalidArgument, "ssim data_range must be positive");
  }

  friend bool operator==(const SsimParams&, const SsimParams&) = default;
};

/// Mean local SSIM over every stride-1 window of length `win` with uniform
/// weights and unbiased (win - 1) variance estimates.
inline double ssim(const Vector& a, const Vector& b, const SsimParams& params = {}) {
  params.validate();
  require(a.size() == b.size(), ErrorCode::DimensionMismatch,
          "ssim inputs differ in length: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  require(a.size() >= params.win, ErrorCode::DimensionMismatch,
          "signal length " + std::to_string(a.size()) + " shorter than window " +
              std::to_string(params.win));

  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);
  const Eigen::Index n = a.size();
  const Eigen::Index win = params.win;
  const double inv_w = 1.0 / static_cast<double>(win);
  const double cov_norm = static_cast<double>(win) / static_cast<double>(win - 1);

  double total = 0.0;
  for (Eigen::Index start = 0; start + win <= n; ++start) {
    // Local means first, then centered moments; avoids the cancellation
    // of E[x^2] - E[x]^2 on nearly flat windows.
    const auto wa = a.segment(start, win).array();
    const auto wb = b.segment(start, win).array();
    const double mu_a = wa.sum() * inv_w;
    const double mu_b = wb.sum() * inv_w;
    const double var_a = (wa - mu_a).square().sum() * inv_w * cov_norm;
    const double var_b = (wb - mu_b).square().sum() * inv_w * cov_norm;
    const double cov_ab = ((wa - mu_a) * (wb - mu_b)).sum() * inv_w * cov_norm;
    const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov_ab + c2);
    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    total += num / den;
  }
  const double value = total / static_cast<double>(n - win + 1);
  return std::clamp(value, -1.0, 1.0);
}

/// Similarity of a spectrum to the current target plus the vote reward.
/// The spectrum is min-max normalized first; the target is expected to be
/// normalized already.
inline double human_objective(const std::optional<Vector>& target, const Vector& spectrum,
                              int vote, double reward, const SsimParams& params = {}) {
  require(target.has_value() && target->size() > 0, ErrorCode::InvalidState,
          "human objective needs a target");
  require(vote >= 0 && vote <= 2, ErrorCode::InvalidArgument, "vote must be 0, 1 or 2");
  require(reward >= 0.0, ErrorCode::InvalidArgument, "reward must be non-negative");
  return ssim(*target, normalize_values(spectrum), params) + vote * reward;
}

/// Similarity of a spectrum to the frozen target; no reward term.
inline double auto_objective(const Vector& frozen_target, const Vector& spectrum,
                             const SsimParams& params = {}) {
  require(frozen_target.size() > 0, ErrorCode::InvalidState, "automated objective needs a target");
  return ssim(frozen_target, normalize_values(spectrum), params);
}

}  // namespace boars
