#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "boars/acquisition.hpp"
#include "boars/dataset.hpp"
#include "boars/gp.hpp"
#include "boars/instrument.hpp"
#include "boars/recommender.hpp"
#include "boars/ssim.hpp"
#include "boars/voter.hpp"

namespace boars {

struct BOConfig {
  int window = 4;
  int initial = 10;
  int iterations = 200;
  KernelKind kernel = KernelKind::Deep;
  KernelOptions kernel_options;
  AcquisitionSpec acquisition;
  double reward = 0.1;
  SsimParams ssim;
  TrainConfig train;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // 0 selects the default cadence

  void validate() const {
    require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
    require(initial >= 2, ErrorCode::InvalidArgument, "need at least 2 initial samples");
    require(iterations >= 1, ErrorCode::InvalidArgument, "need at least 1 iteration");
    require(reward >= 0.0, ErrorCode::InvalidArgument, "reward must be non-negative");
    require(snapshot_every >= 0, ErrorCode::InvalidArgument, "snapshot_every must be >= 0");
    acquisition.validate();
    ssim.validate();
    train.validate();
  }

  void validate_against(const SpectralGrid& grid) const {
    validate();
    require(window <= std::min(grid.height(), grid.width()), ErrorCode::InvalidArgument,
            "window larger than grid");
    const auto n = static_cast<long>(grid.height() - window + 1) * (grid.width() - window + 1);
    require(static_cast<long>(initial) + iterations <= n, ErrorCode::InvalidArgument,
            "budget j + M = " + std::to_string(initial + iterations) + " exceeds " +
                std::to_string(n) + " candidates");
    require(grid.spectrum_len() >= ssim.win, ErrorCode::InvalidArgument,
            "spectrum length shorter than the ssim window");
  }

  /// Every iteration for short runs, every 5th otherwise.
  int snapshot_interval() const {
    if (snapshot_every > 0) return snapshot_every;
    return iterations <= 100 ? 1 : 5;
  }
};

inline nlohmann::json to_json(const BOConfig& c) {
  return {{"window", c.window},
          {"initial", c.initial},
          {"iterations", c.iterations},
          {"kernel", to_string(c.kernel)},
          {"deep_base", to_string(c.kernel_options.deep_base)},
          {"hidden", c.kernel_options.hidden},
          {"latent_dim", c.kernel_options.latent_dim},
          {"acquisition", to_string(c.acquisition.kind)},
          {"xi", c.acquisition.xi},
          {"kappa", c.acquisition.kappa},
          {"reward", c.reward},
          {"ssim", {{"win", c.ssim.win}, {"k1", c.ssim.k1}, {"k2", c.ssim.k2}, {"data_range", c.ssim.data_range}}},
          {"train",
           {{"steps", c.train.steps},
            {"learning_rate", c.train.learning_rate},
            {"net_learning_rate", c.train.net_learning_rate},
            {"jitter", c.train.jitter},
            {"max_jitter", c.train.max_jitter},
            {"seed", c.train.seed}}},
          {"seed", c.seed},
          {"snapshot_every", c.snapshot_every}};
}

/// Missing keys keep their defaults.
inline BOConfig config_from_json(const nlohmann::json& j) {
  BOConfig c;
  try {
    c.window = j.value("window", c.window);
    c.initial = j.value("initial", c.initial);
    c.iterations = j.value("iterations", c.iterations);
    if (j.contains("kernel")) c.kernel = kernel_kind_from_string(j.at("kernel").get<std::string>());
    if (j.contains("deep_base"))
      c.kernel_options.deep_base = kernel_kind_from_string(j.at("deep_base").get<std::string>());
    c.kernel_options.hidden = j.value("hidden", c.kernel_options.hidden);
    c.kernel_options.latent_dim = j.value("latent_dim", c.kernel_options.latent_dim);
    if (j.contains("acquisition"))
      c.acquisition.kind = acquisition_kind_from_string(j.at("acquisition").get<std::string>());
    c.acquisition.xi = j.value("xi", c.acquisition.xi);
    c.acquisition.kappa = j.value("kappa", c.acquisition.kappa);
    c.reward = j.value("reward", c.reward);
    if (j.contains("ssim")) {
      const auto& s = j.at("ssim");
      c.ssim.win = s.value("win", c.ssim.win);
      c.ssim.k1 = s.value("k1", c.ssim.k1);
      c.ssim.k2 = s.value("k2", c.ssim.k2);
      c.ssim.data_range = s.value("data_range", c.ssim.data_range);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.steps = t.value("steps", c.train.steps);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.net_learning_rate = t.value("net_learning_rate", c.train.net_learning_rate);
      c.train.jitter = t.value("jitter", c.train.jitter);
      c.train.max_jitter = t.value("max_jitter", c.train.max_jitter);
      c.train.seed = t.value("seed", c.train.seed);
    }
    c.seed = j.value("seed", c.seed);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Rectangle of candidate pixels; maps are stored row-major over it.
struct Lattice {
  int rows = 0;
  int cols = 0;
  int row_offset = 0;
  int col_offset = 0;

  static Lattice of(const SpectralGrid& grid, int window) {
    return {grid.height() - window + 1, grid.width() - window + 1, window_offset(window),
            window_offset(window)};
  }

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }

  std::size_t position(GridIndex idx) const {
    require(idx.row >= row_offset && idx.row < row_offset + rows && idx.col >= col_offset &&
                idx.col < col_offset + cols,
            ErrorCode::OutOfRange, "index " + to_string(idx) + " is not a candidate");
    return static_cast<std::size_t>(idx.row - row_offset) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(idx.col - col_offset);
  }

  GridIndex at(std::size_t pos) const {
    return {row_offset + static_cast<int>(pos / static_cast<std::size_t>(cols)),
            col_offset + static_cast<int>(pos % static_cast<std::size_t>(cols))};
  }

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

struct MapSet {
  int iteration = 0;
  Lattice lattice;
  Vector mean;
  Vector variance;
  std::optional<Vector> truth;
  std::optional<Vector> error;
  std::optional<double> mse;
};

struct TargetSnapshot {
  int iteration = 0;
  std::optional<Vector> target;
};

enum class RunStatus { Running, Finished, Aborted };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Finished: return "finished";
    case RunStatus::Aborted: return "aborted";
  }
  return "unknown";
}

struct RunRecord {
  std::string arm = "boars";
  BOConfig config;
  nlohmann::json dataset_info = nlohmann::json::object();
  RunStatus status = RunStatus::Running;
  std::string abort_reason;
  std::vector<nlohmann::json> events;
  std::vector<TargetSnapshot> targets;
  std::vector<MapSet> snapshots;
  std::optional<MapSet> final_maps;
  std::optional<KernelSpec> final_kernel;
  std::vector<GridIndex> explored;
  std::vector<double> objectives;
  std::optional<Vector> final_target;
  bool frozen = false;
  int freeze_iteration = -1;
  double runtime_seconds = 0.0;
};

inline nlohmann::json index_json(GridIndex idx) { return nlohmann::json::array({idx.row, idx.col}); }

inline nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct Pending {
  enum class Kind { None, Vote, Satisfaction };
  Kind kind = Kind::None;
  GridIndex index;
  Vector spectrum;
  int iteration = 0;
};

/// Rescales patch values by the global image range so every input lies
/// in [0, 1].
inline Matrix candidate_inputs(const SpectralGrid& grid, const std::vector<GridIndex>& candidates,
                               int window) {
  const double lo = grid.image().minCoeff();
  const double hi = grid.image().maxCoeff();
  const double scale = hi > lo ? 1.0 / (hi - lo) : 1.0;
  Matrix x(static_cast<Eigen::Index>(candidates.size()), window * window);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) =
        ((extract_patch(grid, candidates[i], window).values.array() - lo) * scale).transpose();
  return x;
}

/// Stepwise BOARS loop. Computation advances until the next human
/// interaction is needed; callers answer through submit_vote and
/// submit_satisfaction.
class Experiment {
 public:
  Experiment(BOConfig config, std::shared_ptr<const SpectralGrid> grid)
      : config_(std::move(config)), instrument_(grid), rng_(config_.seed) {
    config_.validate_against(*grid);
    candidates_ = candidate_indices(*grid, config_.window);
    lattice_ = Lattice::of(*grid, config_.window);
    inputs_ = candidate_inputs(*grid, candidates_, config_.window);
    explored_.assign(candidates_.size(), 0);
    record_.config = config_;
    record_.dataset_info = grid->meta();
    record_.dataset_info["height"] = grid->height();
    record_.dataset_info["width"] = grid->width();
    record_.dataset_info["spectrum_len"] = grid->spectrum_len();

    // Partial Fisher-Yates on raw engine output.
    std::vector<std::size_t> order(candidates_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int i = 0; i < config_.initial; ++i) {
      const auto remaining = static_cast<std::uint64_t>(order.size() - static_cast<std::size_t>(i));
      const auto pick = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng_() % remaining);
      std::swap(order[static_cast<std::size_t>(i)], order[pick]);
    }
    initial_order_.assign(order.begin(), order.begin() + config_.initial);
    started_ = std::chrono::steady_clock::now();
  }

  const BOConfig& config() const { return config_; }
  const SpectralGrid& grid() const { return instrument_.grid(); }
  const std::vector<GridIndex>& candidates() const { return candidates_; }
  const Lattice& lattice() const { return lattice_; }
  const TargetState& target_state() const { return target_; }
  const Dataset& dataset() const { return data_; }
  const Pending& pending() const { return pending_; }
  int iteration() const { return iteration_; }
  std::size_t explored_count() const { return instrument_.log().size(); }
  RunStatus status() const { return record_.status; }
  bool done() const { return stage_ == Stage::Done; }
  int votes_cast() const { return static_cast<int>(target_.history.size()); }
  const SimulatedInstrument& instrument() const { return instrument_; }
  const std::optional<MapSet>& latest_maps() const { return latest_maps_; }
  std::vector<GridIndex> explored_indices() const {
    std::vector<GridIndex> out;
    for (const auto& entry : instrument_.log()) out.push_back(entry.index);
    return out;
  }

  /// One unit of work. Returns false when blocked on a human or done.
  bool step() {
    switch (stage_) {
      case Stage::InitAcquire: init_acquire(); return true;
      case Stage::InitScore: init_score(); return true;
      case Stage::Iterate: iterate(); return true;
      case Stage::Final: finalize(); return true;
      case Stage::InitVote:
      case Stage::AwaitSatisfaction:
      case Stage::AwaitVote:
      case Stage::Done: return false;
    }
    return false;
  }

  void advance() {
    while (step()) {
    }
  }

  void submit_vote(const VoteDecision& decision) {
    require(pending_.kind == Pending::Kind::Vote, ErrorCode::Conflict, "no vote is pending");
    const Vote vote(decision.vote);
    const Preference pref(decision.preference);
    const GridIndex idx = pending_.index;
    target_ = record_vote(std::move(target_), idx, pending_.spectrum, vote, pref);
    log_event({{"type", "vote"},
               {"index", index_json(idx)},
               {"vote", vote.value()},
               {"preference", pref.value()},
               {"target", target_.target ? vector_json(*target_.target) : nlohmann::json(nullptr)},
               {"vote_weight", target_.vote_weight}});
    if (stage_ == Stage::InitVote) {
      initial_votes_.push_back(vote.value());
      pending_ = {};
      stage_ = Stage::InitAcquire;
      return;
    }
    require(stage_ == Stage::AwaitVote, ErrorCode::InvalidState, "vote submitted at the wrong stage");
    const double y = target_.target
                         ? human_objective(target_.target, current_.spectrum.values, vote.value(),
                                           config_.reward, config_.ssim)
                         : vote.value() * config_.reward;
    pending_ = {};
    augment(y);
  }

  void submit_satisfaction(bool satisfied) {
    require(pending_.kind == Pending::Kind::Satisfaction, ErrorCode::Conflict,
            "no satisfaction prompt is pending");
    auto outcome = answer_satisfaction(std::move(target_), satisfied);
    target_ = std::move(outcome.state);
    log_event({{"type", "satisfaction"}, {"iteration", iteration_}, {"satisfied", satisfied}});
    if (!satisfied) {
      pending_ = {Pending::Kind::Vote, current_.spectrum.source, current_.spectrum.values, iteration_};
      stage_ = Stage::AwaitVote;
      return;
    }
    record_.frozen = true;
    record_.freeze_iteration = iteration_;
    log_event({{"type", "freeze"}, {"iteration", iteration_}, {"target", vector_json(*target_.target)}});
    data_ = recompute_objectives(target_, std::move(data_), config_.ssim);
    log_event({{"type", "recompute"}, {"iteration", iteration_}, {"values", data_.outputs}});
    pending_ = {};
    augment(auto_objective(target_, current_.spectrum.values, config_.ssim));
  }

  void abort(const std::string& reason) {
    if (stage_ == Stage::Done) return;
    pending_ = {};
    stage_ = Stage::Done;
    record_.status = RunStatus::Aborted;
    record_.abort_reason = reason;
    log_event({{"type", "abort"}, {"iteration", iteration_}, {"reason", reason}});
    stamp_runtime();
  }

  /// Everything recorded so far. Complete once done() is true.
  RunRecord record() const {
    RunRecord r = record_;
    r.explored = data_.indices;
    r.objectives = data_.outputs;
    r.final_target = target_.target;
    return r;
  }

 private:
  enum class Stage { InitAcquire, InitVote, InitScore, Iterate, AwaitSatisfaction, AwaitVote, Final, Done };

  struct Current {
    std::size_t position = 0;
    Spectrum spectrum;
  };

  void log_event(nlohmann::json ev) {
    ev["seq"] = record_.events.size() + 1;
    record_.events.push_back(std::move(ev));
  }

  Spectrum acquire(std::size_t pos) {
    Spectrum s = instrument_.acquire(candidates_[pos]);
    explored_[pos] = 1;
    log_event({{"type", "acquisition"},
               {"index", index_json(s.source)},
               {"iteration", iteration_},
               {"phase", to_string(target_.phase)},
               {"spectrum", vector_json(s.values)}});
    return s;
  }

  void init_acquire() {
    const std::size_t i = initial_spectra_.size();
    if (i == initial_order_.size()) {
      stage_ = Stage::InitScore;
      return;
    }
    Spectrum s = acquire(initial_order_[i]);
    pending_ = {Pending::Kind::Vote, s.source, s.values, 0};
    initial_spectra_.push_back(std::move(s));
    stage_ = Stage::InitVote;
  }

  // Initial objectives all use the target as it stands after the j-th vote.
  void init_score() {
    for (std::size_t i = 0; i < initial_spectra_.size(); ++i) {
      const int v = initial_votes_[i];
      const double y = target_.target ? human_objective(target_.target, initial_spectra_[i].values, v,
                                                        config_.reward, config_.ssim)
                                      : v * config_.reward;
      data_.append(initial_spectra_[i].source,
                   inputs_.row(static_cast<Eigen::Index>(initial_order_[i])).transpose(),
                   initial_spectra_[i].values, y);
    }
    log_event({{"type", "initial_objectives"}, {"values", data_.outputs}});
    record_.targets.push_back({0, target_.target});
    iteration_ = 1;
    stage_ = Stage::Iterate;
  }

  GPModel fit(int iteration) {
    KernelSpec init = warm_kernel_ ? *warm_kernel_
                                   : make_kernel(config_.kernel, config_.window * config_.window,
                                                 config_.train.seed, config_.kernel_options);
    try {
      return fit_gp(data_.input_matrix(), data_.output_vector(), std::move(init), config_.train);
    } catch (const Error& e) {
      throw Error(e.code(), "surrogate failure at iteration " + std::to_string(iteration) + ": " + e.what());
    }
  }

  MapSet make_maps(const GPModel& model, int iteration) const {
    const Posterior post = posterior(model, inputs_);
    return {iteration, lattice_, post.mean, post.variance, std::nullopt, std::nullopt, std::nullopt};
  }

  void iterate() {
    if (iteration_ > config_.iterations) {
      stage_ = Stage::Final;
      return;
    }
    const GPModel model = fit(iteration_);
    warm_kernel_ = model.kernel;
    MapSet maps = make_maps(model, iteration_);
    const double best = *std::max_element(data_.outputs.begin(), data_.outputs.end());
    const Vector scores = acquisition_scores(maps.mean, maps.variance, best, config_.acquisition);
    const std::size_t pos = select_next_position(scores, candidates_, explored_);
    if (iteration_ % config_.snapshot_interval() == 0) record_.snapshots.push_back(maps);
    latest_maps_ = std::move(maps);

    current_ = {pos, acquire(pos)};
    if (target_.phase == Phase::Automated) {
      augment(auto_objective(target_, current_.spectrum.values, config_.ssim));
    } else if (target_.target) {
      pending_ = {Pending::Kind::Satisfaction, current_.spectrum.source, current_.spectrum.values, iteration_};
      stage_ = Stage::AwaitSatisfaction;
    } else {
      pending_ = {Pending::Kind::Vote, current_.spectrum.source, current_.spectrum.values, iteration_};
      stage_ = Stage::AwaitVote;
    }
  }

  void augment(double y) {
    data_.append(current_.spectrum.source, inputs_.row(static_cast<Eigen::Index>(current_.position)).transpose(),
                 current_.spectrum.values, y);
    log_event({{"type", "objective"},
               {"index", index_json(current_.spectrum.source)},
               {"iteration", iteration_},
               {"value", y}});
    record_.targets.push_back({iteration_, target_.target});
    ++iteration_;
    stage_ = Stage::Iterate;
  }

  void finalize() {
    const GPModel model = fit(config_.iterations + 1);
    warm_kernel_ = model.kernel;
    record_.final_kernel = model.kernel;
    record_.final_maps = make_maps(model, config_.iterations);
    latest_maps_ = record_.final_maps;
    record_.status = RunStatus::Finished;
    log_event({{"type", "finish"}, {"evaluations", data_.size()}});
    stage_ = Stage::Done;
    stamp_runtime();
  }

  void stamp_runtime() {
    record_.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  }

  BOConfig config_;
  SimulatedInstrument instrument_;
  std::mt19937_64 rng_;
  std::vector<GridIndex> candidates_;
  Lattice lattice_;
  Matrix inputs_;
  std::vector<char> explored_;
  std::vector<std::size_t> initial_order_;
  std::vector<Spectrum> initial_spectra_;
  std::vector<int> initial_votes_;
  TargetState target_;
  Dataset data_;
  Stage stage_ = Stage::InitAcquire;
  Pending pending_;
  Current current_;
  int iteration_ = 0;
  std::optional<KernelSpec> warm_kernel_;
  std::optional<MapSet> latest_maps_;
  RunRecord record_;
  std::chrono::steady_clock::time_point started_;
};

/// Runs the full loop with a programmatic voter. A voter that gives up
/// (ErrorCode::Aborted) ends the run with an aborted partial record.
inline RunRecord run_boars(const BOConfig& config, std::shared_ptr<const SpectralGrid> grid, Voter& voter) {
  Experiment exp(config, std::move(grid));
  const Vector& bias = exp.grid().bias();
  while (true) {
    exp.advance();
    if (exp.done()) break;
    const Pending& p = exp.pending();
    try {
      if (p.kind == Pending::Kind::Vote) {
        const auto target = exp.target_state().target;
        exp.submit_vote(voter.vote({p.index, p.spectrum, bias, target, exp.votes_cast()}));
      } else {
        exp.submit_satisfaction(voter.satisfied({*exp.target_state().target, exp.votes_cast(), p.iteration}));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Aborted) throw;
      exp.abort(e.what());
      break;
    }
  }
  return exp.record();
}

/// psi(T, S) at every candidate pixel.
inline Vector ground_truth_map(const SpectralGrid& grid, const Vector& target, int window,
                               const SsimParams& params = {}) {
  const auto candidates = candidate_indices(grid, window);
  Vector truth(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      truth[static_cast<Eigen::Index>(i)] = auto_objective(target, grid.spectrum_at(candidates[i]), params);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at pixel " + to_string(candidates[i]));
    }
  }
  return truth;
}

/// Squared error of the final mean map against the truth, and its mean.
inline MapSet evaluate_run(const RunRecord& record, const Vector& truth) {
  require(record.final_maps.has_value(), ErrorCode::InvalidState, "run has no final map");
  MapSet m = *record.final_maps;
  require(m.mean.size() == truth.size(), ErrorCode::DimensionMismatch,
          "truth map has " + std::to_string(truth.size()) + " entries, estimate has " +
              std::to_string(m.mean.size()));
  m.truth = truth;
  m.error = (m.mean - truth).array().square();
  m.mse = m.error->mean();
  return m;
}

/// Control arm: uniformly random distinct candidates scored against a fixed
/// target, with one surrogate fit at the end.
inline RunRecord random_baseline(const BOConfig& config, std::shared_ptr<const SpectralGrid> grid,
                                 const Vector& frozen_target) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto candidates = candidate_indices(*grid, config.window);
  const auto budget = static_cast<std::size_t>(config.initial) + static_cast<std::size_t>(config.iterations);
  require(budget <= candidates.size(), ErrorCode::InvalidArgument,
          "baseline budget " + std::to_string(budget) + " exceeds " + std::to_string(candidates.size()) +
              " candidates");
  const Matrix inputs = candidate_inputs(*grid, candidates, config.window);
  SimulatedInstrument instrument(grid);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < budget; ++i) {
    const auto pick = i + static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(order.size() - i));
    std::swap(order[i], order[pick]);
  }

  RunRecord r;
  r.arm = "random_baseline";
  r.config = config;
  r.dataset_info = grid->meta();
  Dataset data;
  for (std::size_t i = 0; i < budget; ++i) {
    const Spectrum s = instrument.acquire(candidates[order[i]]);
    const double y = auto_objective(frozen_target, s.values, config.ssim);
    r.events.push_back({{"seq", r.events.size() + 1},
                        {"type", "acquisition"},
                        {"index", index_json(s.source)},
                        {"spectrum", vector_json(s.values)}});
    r.events.push_back({{"seq", r.events.size() + 1},
                        {"type", "objective"},
                        {"index", index_json(s.source)},
                        {"value", y}});
    data.append(s.source, inputs.row(static_cast<Eigen::Index>(order[i])).transpose(), s.values, y);
  }
  const GPModel model = fit_gp(data.input_matrix(), data.output_vector(),
                               make_kernel(config.kernel, config.window * config.window, config.train.seed,
                                           config.kernel_options),
                               config.train);
  const Posterior post = posterior(model, inputs);
  r.final_maps = MapSet{config.iterations, Lattice::of(*grid, config.window), post.mean, post.variance,
                        std::nullopt, std::nullopt, std::nullopt};
  r.final_kernel = model.kernel;
  r.explored = data.indices;
  r.objectives = data.outputs;
  r.final_target = frozen_target;
  r.frozen = true;
  r.status = RunStatus::Finished;
  r.events.push_back({{"seq", r.events.size() + 1}, {"type", "finish"}, {"evaluations", data.size()}});
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

/// Rebuilds the target state from an event log alone.
inline TargetState replay_events(const std::vector<nlohmann::json>& events) {
  TargetState state;
  std::vector<std::pair<GridIndex, Vector>> acquired;
  auto spectrum_for = [&](GridIndex idx) -> const Vector& {
    for (auto it = acquired.rbegin(); it != acquired.rend(); ++it)
      if (it->first == idx) return it->second;
    throw Error(ErrorCode::Format, "vote for " + to_string(idx) + " precedes its acquisition");
  };
  try {
    for (const auto& ev : events) {
      const auto type = ev.at("type").get<std::string>();
      if (type == "acquisition") {
        const GridIndex idx{ev.at("index").at(0).get<int>(), ev.at("index").at(1).get<int>()};
        acquired.emplace_back(idx, vector_from_json(ev.at("spectrum")));
      } else if (type == "vote") {
        const GridIndex idx{ev.at("index").at(0).get<int>(), ev.at("index").at(1).get<int>()};
        state = record_vote(std::move(state), idx, spectrum_for(idx), Vote(ev.at("vote").get<int>()),
                            Preference(ev.at("preference").get<double>()));
      } else if (type == "satisfaction") {
        state = answer_satisfaction(std::move(state), ev.at("satisfied").get<bool>()).state;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed event log: ") + e.what());
  }
  return state;
}

}  // namespace boars
