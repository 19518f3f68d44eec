// Batch runner and HTTP server for BOARS.
//
//   boars --synthetic --seed 7 --kernel deep --out runs/seed7
//   boars --dataset grid.bgrd --voter replay:votes.json --out runs/replay
//   boars --serve --port 8080

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "boars/engine.hpp"
#include "boars/log.hpp"
#include "boars/run_record.hpp"
#include "boars/session.hpp"
#include "boars/synthetic.hpp"

namespace {

boars::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::string summary_line(const boars::RunRecord& r, const std::optional<boars::MapSet>& eval) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "arm=%s status=%s explored=%zu mse=%s runtime=%.3fs", r.arm.c_str(),
                boars::to_string(r.status), r.explored.size(),
                eval && eval->mse ? boars::detail::format_double(*eval->mse).c_str() : "n/a", r.runtime_seconds);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOARS: voting-driven Bayesian optimization over spectral grids"};
  std::string dataset;
  bool synthetic = false;
  std::uint64_t seed = 0;
  double correlation = boars::SyntheticConfig{}.correlation;
  int window = 4, init = 10, iterations = 200;
  int train_steps = boars::TrainConfig{}.steps;
  std::string kernel = "deep", acquisition = "ei", voter_spec = "threshold", out;
  double xi = 0.01, kappa = 2.0, reward = 0.1;
  bool baseline = false, serve = false;
  int port = 8080;
  std::string host = "127.0.0.1";

  auto* ds = app.add_option("--dataset", dataset, "dataset file (.bgrd)");
  auto* syn = app.add_flag("--synthetic", synthetic, "generate a synthetic hysteresis-loop grid");
  ds->excludes(syn);
  app.add_option("--seed", seed, "seed for the dataset generator, sampling and training");
  app.add_option("--correlation", correlation, "synthetic image/asymmetry correlation")->check(CLI::Range(0.0, 1.0));
  app.add_option("--window", window, "patch size w")->capture_default_str();
  app.add_option("--init", init, "initial random samples j")->capture_default_str();
  app.add_option("--iterations", iterations, "BO iterations M")->capture_default_str();
  app.add_option("--kernel", kernel, "rbf|periodic|deep")->check(CLI::IsMember({"rbf", "periodic", "deep"}))->capture_default_str();
  app.add_option("--acquisition", acquisition, "ei|pi|ucb")->check(CLI::IsMember({"ei", "pi", "ucb"}))->capture_default_str();
  app.add_option("--xi", xi, "EI/PI exploration offset")->capture_default_str();
  app.add_option("--kappa", kappa, "UCB confidence weight")->capture_default_str();
  app.add_option("--train-steps", train_steps, "Adam steps per surrogate fit")->capture_default_str();
  app.add_option("--reward", reward, "vote reward R")->capture_default_str();
  app.add_option("--voter", voter_spec, "threshold | replay:PATH")->capture_default_str();
  app.add_flag("--baseline", baseline, "also run the random-sampling control arm");
  app.add_option("--out", out, "export directory");
  app.add_flag("--serve", serve, "run the HTTP API instead of a batch job");
  app.add_option("--port", port, "HTTP port")->capture_default_str();
  app.add_option("--host", host, "HTTP bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (serve) {
    boars::SessionManager manager;
    boars::ApiServer server(manager);
    try {
      const int bound = server.bind(host, port);
      std::cout << "listening on " << host << ":" << bound << std::endl;
    } catch (const boars::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    return server.serve() ? 0 : 2;
  }

  // Setup problems exit 1, failures during the run exit 2.
  std::shared_ptr<const boars::SpectralGrid> grid;
  boars::BOConfig config;
  std::unique_ptr<boars::Voter> voter;
  try {
    if (dataset.empty() == !synthetic)
      throw boars::Error(boars::ErrorCode::InvalidArgument, "exactly one of --dataset or --synthetic is required");
    if (synthetic) {
      boars::SyntheticConfig sc;
      sc.correlation = correlation;
      grid = std::make_shared<const boars::SpectralGrid>(boars::generate_synthetic_grid(sc, seed));
    } else {
      grid = std::make_shared<const boars::SpectralGrid>(boars::load_dataset(dataset));
    }
    config.window = window;
    config.initial = init;
    config.iterations = iterations;
    config.kernel = boars::kernel_kind_from_string(kernel);
    config.acquisition = {boars::acquisition_kind_from_string(acquisition), xi, kappa};
    config.reward = reward;
    config.seed = seed;
    config.train.seed = seed;
    config.train.steps = train_steps;
    config.validate_against(*grid);
    if (voter_spec == "threshold") {
      voter = std::make_unique<boars::ThresholdVoter>();
    } else if (voter_spec.rfind("replay:", 0) == 0) {
      voter = std::make_unique<boars::ReplayVoter>(boars::ReplayVoter::from_file(voter_spec.substr(7)));
    } else {
      throw boars::Error(boars::ErrorCode::InvalidArgument, "unknown voter '" + voter_spec + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const boars::RunRecord record = boars::run_boars(config, grid, *voter);
    if (record.status == boars::RunStatus::Aborted) {
      if (!out.empty()) boars::export_run(record, out);
      std::cout << summary_line(record, std::nullopt) << std::endl;
      std::cerr << "error: run aborted: " << record.abort_reason << '\n';
      return 2;
    }
    std::optional<boars::MapSet> eval;
    if (record.frozen && record.final_target)
      eval = boars::evaluate_run(record,
                                 boars::ground_truth_map(*grid, *record.final_target, config.window, config.ssim));
    else
      boars::log::warn("target never frozen; no ground truth available");
    if (!out.empty()) boars::export_run(record, out, eval);
    std::cout << summary_line(record, eval) << std::endl;

    if (baseline) {
      if (!record.final_target) throw boars::Error(boars::ErrorCode::InvalidState, "baseline needs a target");
      const boars::RunRecord base = boars::random_baseline(config, grid, *record.final_target);
      const auto base_eval = boars::evaluate_run(
          base, boars::ground_truth_map(*grid, *record.final_target, config.window, config.ssim));
      if (!out.empty()) boars::export_run(base, std::filesystem::path(out) / "baseline", base_eval);
      std::cout << summary_line(base, base_eval) << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
