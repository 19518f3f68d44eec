#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "boars/grid.hpp"

namespace boars {

enum class AcquisitionKind { EI, PI, UCB };

inline const char* to_string(AcquisitionKind k) {
  switch (k) {
    case AcquisitionKind::EI: return "ei";
    case AcquisitionKind::PI: return "pi";
    case AcquisitionKind::UCB: return "ucb";
  }
  return "unknown";
}

inline AcquisitionKind acquisition_kind_from_string(const std::string& s) {
  if (s == "ei") return AcquisitionKind::EI;
  if (s == "pi") return AcquisitionKind::PI;
  if (s == "ucb") return AcquisitionKind::UCB;
  throw Error(ErrorCode::InvalidArgument, "unknown acquisition '" + s + "'");
}

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::EI;
  double xi = 0.01;
  double kappa = 2.0;

  void validate() const {
    require(xi >= 0.0, ErrorCode::InvalidArgument, "xi must be non-negative");
    require(kappa >= 0.0, ErrorCode::InvalidArgument, "kappa must be non-negative");
  }
};

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Scores for maximization. EI and PI measure improvement over `best`
/// (offset by xi); UCB is mean + kappa * stddev.
inline Vector acquisition_scores(const Vector& means, const Vector& variances, double best,
                                 const AcquisitionSpec& spec) {
  spec.validate();
  require(means.size() == variances.size(), ErrorCode::DimensionMismatch,
          "means and variances differ in length");
  Vector scores(means.size());
  for (Eigen::Index i = 0; i < means.size(); ++i) {
    require(variances[i] >= 0.0, ErrorCode::InvalidArgument,
            "negative variance at candidate " + std::to_string(i));
    const double mu = means[i];
    const double sigma = std::sqrt(variances[i]);
    switch (spec.kind) {
      case AcquisitionKind::EI: {
        const double gain = mu - best - spec.xi;
        if (sigma == 0.0) {
          scores[i] = std::max(0.0, gain);
        } else {
          const double z = gain / sigma;
          scores[i] = std::max(0.0, sigma * (z * normal_cdf(z) + normal_pdf(z)));
        }
        break;
      }
      case AcquisitionKind::PI: {
        const double gain = mu - best - spec.xi;
        scores[i] = sigma == 0.0 ? (gain > 0.0 ? 1.0 : 0.0) : normal_cdf(gain / sigma);
        break;
      }
      case AcquisitionKind::UCB:
        scores[i] = mu + spec.kappa * sigma;
        break;
    }
  }
  return scores;
}

/// Argmax over candidates not yet explored. `scores[i]` belongs to
/// `candidates[i]`; ties go to the smaller row-major index.
inline std::size_t select_next_position(const Vector& scores, const std::vector<GridIndex>& candidates,
                                        const std::vector<char>& explored) {
  require(static_cast<std::size_t>(scores.size()) == candidates.size() &&
              explored.size() == candidates.size(),
          ErrorCode::DimensionMismatch, "scores, candidates and explored mask differ in length");
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (explored[i]) continue;
    const double s = scores[static_cast<Eigen::Index>(i)];
    if (best == candidates.size()) {
      best = i;
      continue;
    }
    const double b = scores[static_cast<Eigen::Index>(best)];
    if (s > b || (s == b && candidates[i] < candidates[best]) || (std::isnan(b) && !std::isnan(s)))
      best = i;
  }
  require(best != candidates.size(), ErrorCode::InvalidState, "all candidates are explored");
  return best;
}

inline GridIndex select_next(const Vector& scores, const std::vector<GridIndex>& candidates,
                             const std::vector<char>& explored) {
  return candidates[select_next_position(scores, candidates, explored)];
}

}  // namespace boars
