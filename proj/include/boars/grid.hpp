#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boars/error.hpp"

namespace boars {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
  friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

inline std::string to_string(const GridIndex& idx) {
  return "(" + std::to_string(idx.row) + ", " + std::to_string(idx.col) + ")";
}

struct Patch {
  Vector values;
  GridIndex anchor;
  int window = 0;
};

struct Spectrum {
  Vector values;
  GridIndex source;
};

/// Scalar image plus one spectrum per pixel on a shared bias axis.
///
/// Immutable after construction; the constructor enforces the shape and
/// finiteness invariants, so every live instance is valid.
class SpectralGrid {
 public:
  SpectralGrid() = default;

  SpectralGrid(RowMatrix image, std::vector<double> spectra, Vector bias,
               nlohmann::json meta = nlohmann::json::object())
      : image_(std::move(image)), spectra_(std::move(spectra)), bias_(std::move(bias)),
        meta_(std::move(meta)) {
    require(image_.rows() > 0 && image_.cols() > 0, ErrorCode::DimensionMismatch,
            "grid must have at least one pixel");
    require(bias_.size() > 0, ErrorCode::DimensionMismatch, "bias axis is empty");
    const auto expected = static_cast<std::size_t>(image_.rows()) *
                          static_cast<std::size_t>(image_.cols()) *
                          static_cast<std::size_t>(bias_.size());
    require(spectra_.size() == expected, ErrorCode::DimensionMismatch,
            "spectra payload has " + std::to_string(spectra_.size()) + " values, expected " +
                std::to_string(expected));
    require(image_.allFinite(), ErrorCode::NonFinite, "image contains non-finite values");
    require(bias_.allFinite(), ErrorCode::NonFinite, "bias axis contains non-finite values");
    for (std::size_t i = 0; i < spectra_.size(); ++i) {
      if (!std::isfinite(spectra_[i])) {
        throw Error(ErrorCode::NonFinite,
                    "spectra payload contains a non-finite value at flat offset " +
                        std::to_string(i));
      }
    }
    if (meta_.is_null()) meta_ = nlohmann::json::object();
    require(meta_.is_object(), ErrorCode::Format, "meta must be a JSON object");
  }

  int height() const { return static_cast<int>(image_.rows()); }
  int width() const { return static_cast<int>(image_.cols()); }
  int spectrum_len() const { return static_cast<int>(bias_.size()); }

  const RowMatrix& image() const { return image_; }
  const Vector& bias() const { return bias_; }
  const nlohmann::json& meta() const { return meta_; }
  const std::vector<double>& spectra_data() const { return spectra_; }

  bool contains(GridIndex idx) const {
    return idx.row >= 0 && idx.row < height() && idx.col >= 0 && idx.col < width();
  }

  Vector spectrum_at(GridIndex idx) const {
    require(contains(idx), ErrorCode::OutOfRange, "grid index " + to_string(idx) + " out of range");
    const auto len = static_cast<std::size_t>(spectrum_len());
    const auto offset =
        (static_cast<std::size_t>(idx.row) * static_cast<std::size_t>(width()) +
         static_cast<std::size_t>(idx.col)) * len;
    Vector out(spectrum_len());
    for (std::size_t l = 0; l < len; ++l) out[static_cast<Eigen::Index>(l)] = spectra_[offset + l];
    return out;
  }

  friend bool operator==(const SpectralGrid& a, const SpectralGrid& b) {
    return a.image_ == b.image_ && a.spectra_ == b.spectra_ && a.bias_ == b.bias_ &&
           a.meta_ == b.meta_;
  }

 private:
  RowMatrix image_;
  std::vector<double> spectra_;  // (row, col, bias) order
  Vector bias_;
  nlohmann::json meta_ = nlohmann::json::object();
};

namespace detail {

inline constexpr char kGridMagic[4] = {'B', 'G', 'R', 'D'};

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xffu),
                        static_cast<unsigned char>((v >> 8) & 0xffu),
                        static_cast<unsigned char>((v >> 16) & 0xffu),
                        static_cast<unsigned char>((v >> 24) & 0xffu)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  write_u32_le(os, bits);
}

inline double read_f32_le(const unsigned char* b) {
  return static_cast<double>(std::bit_cast<float>(read_u32_le(b)));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline double parse_double(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Format, "cannot parse number '" + cell + "' in " + where);
  }
}

}  // namespace detail

/// Writes the BGRD container: magic, manifest length, JSON manifest, then
/// float32 little-endian image and spectra payloads.
inline void save_dataset(const SpectralGrid& grid, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["height"] = grid.height();
  manifest["width"] = grid.width();
  manifest["spectrum_len"] = grid.spectrum_len();
  std::vector<double> bias(grid.bias().data(), grid.bias().data() + grid.bias().size());
  manifest["bias"] = bias;
  manifest["meta"] = grid.meta();
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  os.write(detail::kGridMagic, 4);
  detail::write_u32_le(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (int r = 0; r < grid.height(); ++r)
    for (int c = 0; c < grid.width(); ++c) detail::write_f32_le(os, grid.image()(r, c));
  for (double v : grid.spectra_data()) detail::write_f32_le(os, v);
  os.flush();
  require(static_cast<bool>(os), ErrorCode::Io, "write to '" + path.string() + "' failed");
}

inline SpectralGrid load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open dataset '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  require(bytes.size() >= 8, ErrorCode::Format, "dataset file too short");
  require(std::memcmp(bytes.data(), detail::kGridMagic, 4) == 0, ErrorCode::Format,
          "bad magic: not a BGRD dataset");
  const std::uint32_t manifest_len = detail::read_u32_le(bytes.data() + 4);
  require(bytes.size() >= 8 + static_cast<std::size_t>(manifest_len), ErrorCode::Format,
          "manifest length exceeds file size");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + manifest_len);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed manifest: ") + e.what());
  }
  int height = 0, width = 0, len = 0;
  std::vector<double> bias;
  nlohmann::json meta;
  try {
    height = manifest.at("height").get<int>();
    width = manifest.at("width").get<int>();
    len = manifest.at("spectrum_len").get<int>();
    bias = manifest.at("bias").get<std::vector<double>>();
    meta = manifest.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed manifest: ") + e.what());
  }
  require(height > 0 && width > 0 && len > 0, ErrorCode::Format,
          "manifest dimensions must be positive");
  require(static_cast<int>(bias.size()) == len, ErrorCode::DimensionMismatch,
          "bias has " + std::to_string(bias.size()) + " entries but spectrum_len is " +
              std::to_string(len));

  const std::size_t pixels = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  const std::size_t expected_floats = pixels + pixels * static_cast<std::size_t>(len);
  const std::size_t payload = bytes.size() - 8 - manifest_len;
  require(payload == expected_floats * 4, ErrorCode::DimensionMismatch,
          "payload holds " + std::to_string(payload / 4) + " floats, manifest implies " +
              std::to_string(expected_floats));

  const unsigned char* p = bytes.data() + 8 + manifest_len;
  RowMatrix image(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c, p += 4) image(r, c) = detail::read_f32_le(p);
  std::vector<double> spectra(pixels * static_cast<std::size_t>(len));
  for (auto& v : spectra) {
    v = detail::read_f32_le(p);
    p += 4;
  }
  return SpectralGrid(std::move(image), std::move(spectra),
                      Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size())),
                      std::move(meta));
}

/// Builds a grid from hand-written CSV fixtures. The spectra file holds one
/// line per pixel (`row,col,v0,...,vL-1`); the image file holds one line per
/// image row. Without a bias file the axis is the sample index.
inline SpectralGrid import_csv(const std::filesystem::path& spectra_csv,
                               const std::filesystem::path& image_csv,
                               const std::filesystem::path& bias_csv = {}) {
  auto read_lines = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open '" + p.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line.front() != '#') lines.push_back(line);
    }
    return lines;
  };

  const auto image_lines = read_lines(image_csv);
  require(!image_lines.empty(), ErrorCode::Format, "image CSV is empty");
  std::vector<std::vector<double>> rows;
  for (const auto& line : image_lines) {
    std::vector<double> vals;
    for (const auto& cell : detail::split_csv_line(line))
      vals.push_back(detail::parse_double(cell, image_csv.string()));
    rows.push_back(std::move(vals));
  }
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  RowMatrix image(height, width);
  for (int r = 0; r < height; ++r) {
    require(static_cast<int>(rows[static_cast<std::size_t>(r)].size()) == width,
            ErrorCode::DimensionMismatch, "ragged image CSV at line " + std::to_string(r + 1));
    for (int c = 0; c < width; ++c) image(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }

  const auto spectra_lines = read_lines(spectra_csv);
  require(static_cast<int>(spectra_lines.size()) == height * width, ErrorCode::DimensionMismatch,
          "spectra CSV must have one line per pixel");
  int len = -1;
  std::vector<double> spectra;
  std::vector<char> seen(static_cast<std::size_t>(height * width), 0);
  for (const auto& line : spectra_lines) {
    const auto cells = detail::split_csv_line(line);
    require(cells.size() >= 3, ErrorCode::Format, "spectra CSV line too short: " + line);
    if (len < 0) {
      len = static_cast<int>(cells.size()) - 2;
      spectra.assign(static_cast<std::size_t>(height * width * len), 0.0);
    }
    require(static_cast<int>(cells.size()) - 2 == len, ErrorCode::DimensionMismatch,
            "inconsistent spectrum length in spectra CSV");
    const int r = static_cast<int>(detail::parse_double(cells[0], spectra_csv.string()));
    const int c = static_cast<int>(detail::parse_double(cells[1], spectra_csv.string()));
    require(r >= 0 && r < height && c >= 0 && c < width, ErrorCode::OutOfRange,
            "spectra CSV pixel (" + cells[0] + ", " + cells[1] + ") outside image");
    const auto flat = static_cast<std::size_t>(r * width + c);
    require(!seen[flat], ErrorCode::Format, "duplicate pixel in spectra CSV: " + line);
    seen[flat] = 1;
    for (int l = 0; l < len; ++l)
      spectra[flat * static_cast<std::size_t>(len) + static_cast<std::size_t>(l)] =
          detail::parse_double(cells[static_cast<std::size_t>(l) + 2], spectra_csv.string());
  }

  Vector bias(len);
  if (bias_csv.empty()) {
    for (int l = 0; l < len; ++l) bias[l] = l;
  } else {
    std::vector<double> vals;
    for (const auto& line : read_lines(bias_csv))
      for (const auto& cell : detail::split_csv_line(line))
        vals.push_back(detail::parse_double(cell, bias_csv.string()));
    require(static_cast<int>(vals.size()) == len, ErrorCode::DimensionMismatch,
            "bias CSV length does not match spectra");
    for (int l = 0; l < len; ++l) bias[l] = vals[static_cast<std::size_t>(l)];
  }
  return SpectralGrid(std::move(image), std::move(spectra), std::move(bias));
}

/// Image by block mean, spectra by the block's top-left pixel.
inline SpectralGrid downsample_grid(const SpectralGrid& grid, int factor) {
  require(factor > 0, ErrorCode::InvalidArgument, "downsample factor must be positive");
  require(grid.height() % factor == 0 && grid.width() % factor == 0, ErrorCode::InvalidArgument,
          "factor " + std::to_string(factor) + " does not divide grid " +
              std::to_string(grid.height()) + "x" + std::to_string(grid.width()));
  if (factor == 1) return grid;
  const int h = grid.height() / factor;
  const int w = grid.width() / factor;
  const int len = grid.spectrum_len();
  RowMatrix image(h, w);
  std::vector<double> spectra(static_cast<std::size_t>(h * w * len));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      image(r, c) = grid.image().block(r * factor, c * factor, factor, factor).mean();
      const Vector s = grid.spectrum_at({r * factor, c * factor});
      std::copy(s.data(), s.data() + len,
                spectra.begin() + static_cast<std::ptrdiff_t>((r * w + c) * len));
    }
  }
  nlohmann::json meta = grid.meta();
  meta["downsample_factor"] = factor * meta.value("downsample_factor", 1);
  return SpectralGrid(std::move(image), std::move(spectra), grid.bias(), std::move(meta));
}

// Top-left offset of the window anchored at a pixel; even windows lean up-left.
inline int window_offset(int window) { return window / 2; }

inline bool window_fits(const SpectralGrid& grid, GridIndex idx, int window) {
  const int r0 = idx.row - window_offset(window);
  const int c0 = idx.col - window_offset(window);
  return r0 >= 0 && c0 >= 0 && r0 + window <= grid.height() && c0 + window <= grid.width();
}

/// Row-major list of pixels whose window lies fully inside the image. The
/// result is always a rectangle of (H - w + 1) x (W - w + 1) pixels.
inline std::vector<GridIndex> candidate_indices(const SpectralGrid& grid, int window) {
  require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
  require(window <= std::min(grid.height(), grid.width()), ErrorCode::InvalidArgument,
          "window " + std::to_string(window) + " larger than grid");
  const int off = window_offset(window);
  std::vector<GridIndex> out;
  out.reserve(static_cast<std::size_t>((grid.height() - window + 1) * (grid.width() - window + 1)));
  for (int r = off; r + window - off <= grid.height(); ++r)
    for (int c = off; c + window - off <= grid.width(); ++c) out.push_back({r, c});
  return out;
}

inline Patch extract_patch(const SpectralGrid& grid, GridIndex idx, int window) {
  require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
  require(window_fits(grid, idx, window), ErrorCode::OutOfRange,
          "window " + std::to_string(window) + " at " + to_string(idx) +
              " leaves the valid interior band");
  const int r0 = idx.row - window_offset(window);
  const int c0 = idx.col - window_offset(window);
  Patch p{Vector(window * window), idx, window};
  for (int i = 0; i < window; ++i)
    for (int j = 0; j < window; ++j) p.values[i * window + j] = grid.image()(r0 + i, c0 + j);
  return p;
}

/// Min-max rescale to [0, 1]. Throws on a constant vector.
inline Vector normalize_values(const Vector& v) {
  require(v.size() > 0, ErrorCode::DegenerateSpectrum, "empty spectrum");
  require(v.allFinite(), ErrorCode::NonFinite, "spectrum contains non-finite values");
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  require(hi > lo, ErrorCode::DegenerateSpectrum, "constant spectrum cannot be normalized");
  Vector out = (v.array() - lo) / (hi - lo);
  // Pin the extremes so min is exactly 0 and max exactly 1.
  Eigen::Index imin = 0, imax = 0;
  v.minCoeff(&imin);
  v.maxCoeff(&imax);
  out[imin] = 0.0;
  out[imax] = 1.0;
  return out;
}

inline Spectrum normalize_spectrum(const Spectrum& s) {
  try {
    return {normalize_values(s.values), s.source};
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " at " + to_string(s.source));
  }
}

}  // namespace boars
