#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "boars/grid.hpp"

namespace boars {

struct AcquisitionLogEntry {
  std::uint64_t seq = 0;
  GridIndex index;
};

/// Stand-in for the microscope: serves the pre-acquired spectrum at a pixel.
///
/// The grid is shared read-only. Acquisitions are single-writer; callers on
/// different threads must serialize them.
class SimulatedInstrument {
 public:
  explicit SimulatedInstrument(std::shared_ptr<const SpectralGrid> grid) : grid_(std::move(grid)) {
    require(grid_ != nullptr, ErrorCode::InvalidArgument, "instrument needs a grid");
  }

  const SpectralGrid& grid() const { return *grid_; }
  std::shared_ptr<const SpectralGrid> grid_ptr() const { return grid_; }

  Spectrum acquire(GridIndex idx) {
    require(grid_->contains(idx), ErrorCode::OutOfRange,
            "acquisition index " + to_string(idx) + " outside the grid");
    Spectrum s{grid_->spectrum_at(idx), idx};
    log_.push_back({next_seq_++, idx});
    return s;
  }

  const std::vector<AcquisitionLogEntry>& log() const { return log_; }

 private:
  std::shared_ptr<const SpectralGrid> grid_;
  std::vector<AcquisitionLogEntry> log_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace boars
