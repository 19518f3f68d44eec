#pragma once

#include <vector>

#include "boars/grid.hpp"

namespace boars {

/// Explored samples: patch inputs, objective values, and the raw spectra
/// kept so objectives can be recomputed when the target freezes.
struct Dataset {
  std::vector<GridIndex> indices;
  std::vector<Vector> inputs;
  std::vector<Vector> spectra;
  std::vector<double> outputs;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  void append(GridIndex idx, Vector input, Vector spectrum, double y) {
    indices.push_back(idx);
    inputs.push_back(std::move(input));
    spectra.push_back(std::move(spectrum));
    outputs.push_back(y);
  }

  Matrix input_matrix() const {
    if (inputs.empty()) return {};
    Matrix x(static_cast<Eigen::Index>(inputs.size()), inputs.front().size());
    for (std::size_t i = 0; i < inputs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = inputs[i].transpose();
    return x;
  }

  Vector output_vector() const {
    return Eigen::Map<const Vector>(outputs.data(), static_cast<Eigen::Index>(outputs.size()));
  }
};

}  // namespace boars
