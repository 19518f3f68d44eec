#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "boars/engine.hpp"

namespace boars {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write '" + path.string() + "'");
  os << text;
  require(static_cast<bool>(os), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Deterministic run summary: no wall-clock values.
inline nlohmann::json summary_json(const RunRecord& r, const std::optional<MapSet>& evaluated = std::nullopt) {
  nlohmann::json explored = nlohmann::json::array();
  for (const auto& idx : r.explored) explored.push_back(index_json(idx));
  nlohmann::json j = {{"arm", r.arm},
                      {"status", to_string(r.status)},
                      {"aborted", r.status == RunStatus::Aborted},
                      {"config", to_json(r.config)},
                      {"dataset", r.dataset_info},
                      {"evaluations", r.explored.size()},
                      {"explored", explored},
                      {"objectives", r.objectives},
                      {"frozen", r.frozen},
                      {"freeze_iteration", r.freeze_iteration},
                      {"final_target", r.final_target ? vector_json(*r.final_target) : nlohmann::json(nullptr)},
                      {"events", r.events.size()}};
  if (r.status == RunStatus::Aborted) j["abort_reason"] = r.abort_reason;
  if (evaluated && evaluated->mse) j["mse"] = *evaluated->mse;
  return j;
}

/// CSV over the candidate lattice: row, col, mean, variance, then truth and
/// error when present.
inline std::string map_csv(const MapSet& m) {
  const bool full = m.truth && m.error;
  std::string out = full ? "row,col,mean,variance,truth,error\n" : "row,col,mean,variance\n";
  for (std::size_t i = 0; i < m.lattice.size(); ++i) {
    const GridIndex idx = m.lattice.at(i);
    const auto k = static_cast<Eigen::Index>(i);
    out += std::to_string(idx.row) + ',' + std::to_string(idx.col) + ',' + detail::format_double(m.mean[k]) +
           ',' + detail::format_double(m.variance[k]);
    if (full)
      out += ',' + detail::format_double((*m.truth)[k]) + ',' + detail::format_double((*m.error)[k]);
    out += '\n';
  }
  return out;
}

inline std::string single_map_csv(const Lattice& lattice, const Vector& values, const char* name) {
  std::string out = std::string("row,col,") + name + "\n";
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const GridIndex idx = lattice.at(i);
    out += std::to_string(idx.row) + ',' + std::to_string(idx.col) + ',' +
           detail::format_double(values[static_cast<Eigen::Index>(i)]) + '\n';
  }
  return out;
}

/// Writes the run directory:
///   run.json, events.jsonl, timings.json, model.json (when fitted),
///   maps/NNNN.csv per snapshot, maps/final.csv, truth.csv and error.csv
///   (when `evaluated` carries them).
inline void export_run(const RunRecord& r, const std::filesystem::path& dir,
                       const std::optional<MapSet>& evaluated = std::nullopt) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "maps", ec);
  require(!ec, ErrorCode::Io, "cannot create '" + (dir / "maps").string() + "': " + ec.message());

  detail::write_text(dir / "run.json", summary_json(r, evaluated).dump(2) + "\n");
  std::string events;
  for (const auto& ev : r.events) events += ev.dump() + "\n";
  detail::write_text(dir / "events.jsonl", events);
  detail::write_text(dir / "timings.json", nlohmann::json{{"runtime_seconds", r.runtime_seconds}}.dump(2) + "\n");
  if (r.final_kernel) detail::write_text(dir / "model.json", to_json(*r.final_kernel).dump() + "\n");

  for (const auto& snap : r.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.csv", snap.iteration);
    detail::write_text(dir / "maps" / name, map_csv(snap));
  }
  const MapSet* final_maps = evaluated ? &*evaluated : (r.final_maps ? &*r.final_maps : nullptr);
  if (final_maps) {
    detail::write_text(dir / "maps" / "final.csv", map_csv(*final_maps));
    if (final_maps->truth) detail::write_text(dir / "truth.csv", single_map_csv(final_maps->lattice, *final_maps->truth, "truth"));
    if (final_maps->error) detail::write_text(dir / "error.csv", single_map_csv(final_maps->lattice, *final_maps->error, "error"));
  }
}

inline std::vector<nlohmann::json> read_events(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::vector<nlohmann::json> events;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      events.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return events;
}

}  // namespace boars
