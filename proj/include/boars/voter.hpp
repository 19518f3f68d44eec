#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "boars/grid.hpp"

namespace boars {

struct VoteRequest {
  GridIndex index;
  const Vector& spectrum;
  const Vector& bias;
  const std::optional<Vector>& target;
  int votes_cast = 0;
};

struct SatisfactionRequest {
  const Vector& target;
  int votes_cast = 0;
  int iteration = 0;
};

struct VoteDecision {
  int vote = 0;
  double preference = 0.5;
};

/// Supplies the human side of the loop.
class Voter {
 public:
  virtual ~Voter() = default;
  virtual VoteDecision vote(const VoteRequest& request) = 0;
  virtual bool satisfied(const SatisfactionRequest& request) = 0;
};

/// How closely forward(V) matches reverse(-V) after min-max normalization,
/// as 1 - mean |forward(V) - reverse(-V)|. The sweep is split at its bias
/// maximum; the reverse branch is linearly interpolated at -V.
inline double loop_symmetry(const Vector& spectrum, const Vector& bias) {
  require(spectrum.size() == bias.size(), ErrorCode::DimensionMismatch,
          "spectrum and bias differ in length");
  const Vector s = normalize_values(spectrum);
  Eigen::Index turn = 0;
  bias.maxCoeff(&turn);
  require(turn > 0 && turn < bias.size() - 1, ErrorCode::InvalidArgument,
          "bias sweep has no interior turning point");
  // Reverse branch as (bias, value) sorted ascending by bias.
  std::vector<std::pair<double, double>> rev;
  for (Eigen::Index i = turn + 1; i < bias.size(); ++i) rev.emplace_back(bias[i], s[i]);
  std::sort(rev.begin(), rev.end());
  auto reverse_at = [&](double v) {
    if (v <= rev.front().first) return rev.front().second;
    if (v >= rev.back().first) return rev.back().second;
    auto hi = std::lower_bound(rev.begin(), rev.end(), std::make_pair(v, -1e300));
    auto lo = hi - 1;
    const double t = (v - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  };
  double acc = 0.0;
  for (Eigen::Index i = 0; i <= turn; ++i) acc += std::abs(s[i] - reverse_at(-bias[i]));
  return 1.0 - acc / static_cast<double>(turn + 1);
}

/// Mechanized operator: votes by loop symmetry with fixed cutoffs and a
/// fixed preference, and is satisfied once enough votes are in.
class ThresholdVoter : public Voter {
 public:
  struct Options {
    double very_good_cutoff = 0.9;
    double good_cutoff = 0.75;
    double preference = 0.5;
    int satisfy_after = 10;
  };

  ThresholdVoter() : ThresholdVoter(Options{}) {}
  explicit ThresholdVoter(Options opts) : opts_(opts) {
    require(opts_.very_good_cutoff >= opts_.good_cutoff, ErrorCode::InvalidArgument,
            "threshold cutoffs must be ordered");
    require(opts_.preference >= 0.0 && opts_.preference <= 1.0, ErrorCode::InvalidArgument,
            "preference must lie in [0, 1]");
    require(opts_.satisfy_after >= 1, ErrorCode::InvalidArgument, "satisfy_after must be >= 1");
  }

  VoteDecision vote(const VoteRequest& request) override {
    const double score = loop_symmetry(request.spectrum, request.bias);
    const int v = score >= opts_.very_good_cutoff ? 2 : (score >= opts_.good_cutoff ? 1 : 0);
    return {v, opts_.preference};
  }

  bool satisfied(const SatisfactionRequest& request) override {
    return request.votes_cast >= opts_.satisfy_after;
  }

  const Options& options() const { return opts_; }

 private:
  Options opts_;
};

/// Plays back a recorded list of votes and satisfaction answers.
class ReplayVoter : public Voter {
 public:
  ReplayVoter(std::vector<VoteDecision> votes, std::vector<bool> answers)
      : votes_(std::move(votes)), answers_(std::move(answers)) {}

  /// Accepts either {"votes": [{"vote", "preference"}...], "satisfaction": [bool...]}
  /// or an event log array (as written to events.jsonl).
  static ReplayVoter from_json(const nlohmann::json& j) {
    std::vector<VoteDecision> votes;
    std::vector<bool> answers;
    try {
      if (j.is_array()) {
        for (const auto& ev : j) {
          const auto type = ev.at("type").get<std::string>();
          if (type == "vote")
            votes.push_back({ev.at("vote").get<int>(), ev.at("preference").get<double>()});
          else if (type == "satisfaction")
            answers.push_back(ev.at("satisfied").get<bool>());
        }
      } else {
        for (const auto& v : j.at("votes")) {
          if (v.is_array())
            votes.push_back({v.at(0).get<int>(), v.at(1).get<double>()});
          else
            votes.push_back({v.at("vote").get<int>(), v.value("preference", 0.5)});
        }
        for (const auto& a : j.value("satisfaction", nlohmann::json::array())) answers.push_back(a.get<bool>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, std::string("malformed replay script: ") + e.what());
    }
    return ReplayVoter(std::move(votes), std::move(answers));
  }

  static ReplayVoter from_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open replay script '" + path.string() + "'");
    if (path.extension() == ".jsonl") {
      nlohmann::json events = nlohmann::json::array();
      std::string line;
      while (std::getline(is, line))
        if (!line.empty()) events.push_back(nlohmann::json::parse(line));
      return from_json(events);
    }
    try {
      return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, std::string("malformed replay script: ") + e.what());
    }
  }

  VoteDecision vote(const VoteRequest&) override {
    require(next_vote_ < votes_.size(), ErrorCode::Aborted, "replay script has no vote left");
    return votes_[next_vote_++];
  }

  bool satisfied(const SatisfactionRequest&) override {
    require(next_answer_ < answers_.size(), ErrorCode::Aborted,
            "replay script has no satisfaction answer left");
    return answers_[next_answer_++];
  }

 private:
  std::vector<VoteDecision> votes_;
  std::vector<bool> answers_;
  std::size_t next_vote_ = 0;
  std::size_t next_answer_ = 0;
};

}  // namespace boars
