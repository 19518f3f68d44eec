// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "boars/engine.hpp"
#include "boars/synthetic.hpp"
#include "support.hpp"

using namespace boars;
using Clock = std::chrono::steady_clock;
namespace ts = testing_support;

namespace {

int failures = 0;
std::set<std::string> known_red;  // sub-checks excused from the exit status

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// A failing check listed in known_red is still printed as FAIL but does not
// count towards the exit status.
bool gate(const std::string& name, bool ok) {
  std::printf("  %s %s%s\n", name.c_str(), ok ? "PASS" : "FAIL", !ok && known_red.count(name) ? " (known red)" : "");
  return ok || known_red.count(name) > 0;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void ssim_oracle_check() {
  std::mt19937_64 rng(101);
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int i = 0; i < 50; ++i) pairs.emplace_back(ts::random_vector(rng, 64), ts::random_vector(rng, 64));
  const auto t0 = Clock::now();
  std::vector<double> got;
  double self = 0.0;
  for (const auto& [a, b] : pairs) {
    got.push_back(ssim(a, b));
    self = std::max(self, std::abs(ssim(a, a) - 1.0));
  }
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    worst = std::max(worst, std::abs(got[i] - ts::ssim_oracle(pairs[i].first, pairs[i].second)));
  report(1, worst <= 1e-9 && self <= 1e-12 && elapsed < 1.0,
         fmt("ssim vs oracle max abs err %.3g (<= 1e-9), |ssim(x,x)-1| %.3g (<= 1e-12), %.4f s (< 1 s)", worst, self,
             elapsed));
}

void gp_oracle_check() {
  std::mt19937_64 rng(202);
  const KernelKind kinds[] = {KernelKind::Rbf, KernelKind::Periodic, KernelKind::Deep};
  const double h = 1e-5, jitter = 1e-6;
  double worst_post = 0.0, worst_grad = 0.0;
  const auto t0 = Clock::now();
  for (int inst = 0; inst < 20; ++inst) {
    const KernelKind kind = kinds[inst % 3];
    const int n = 5 + static_cast<int>(rng() % 16);
    KernelSpec k = kind == KernelKind::Deep ? make_kernel(kind, 16, 300 + static_cast<std::uint64_t>(inst))
                                            : ts::random_kernel(kind, 16, rng);
    const Matrix x = ts::random_matrix(rng, n, 16);
    ts::spread_lengthscales(k, x, kind == KernelKind::Deep ? 0.25 : 1.0);
    const Vector y = ts::random_vector(rng, n, -1.0, 1.0);
    const Matrix xs = ts::random_matrix(rng, 10, 16);

    const Posterior p = posterior(condition_gp(k, x, y, jitter, jitter), xs);
    const auto o = ts::dense_gp_oracle(k, x, y, jitter, xs);
    const double yscale = y.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      worst_post = std::max(worst_post, ts::rel_err(p.mean[i], o.mean[i], yscale));
      worst_post = std::max(worst_post, ts::rel_err(p.raw_variance[i], o.variance[i], k.base.variance()));
    }

    const NllGradient g = nll_with_gradient(k, x, y, jitter, jitter);
    const Vector p0 = k.flat_params();
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
      Vector q = p0;
      q[i] += h;
      k.set_flat_params(q);
      const double up = nll(k, x, y, jitter);
      q[i] -= 2 * h;
      k.set_flat_params(q);
      const double down = nll(k, x, y, jitter);
      worst_grad = std::max(worst_grad,
                            ts::rel_err(g.grad[i], (up - down) / (2 * h), 1e-3 * std::max(1.0, std::abs(g.value))));
    }
    k.set_flat_params(p0);
  }
  const double elapsed = seconds_since(t0);
  report(2, worst_post <= 1e-6 && worst_grad <= 1e-4 && elapsed < 30.0,
         fmt("posterior max rel err %.3g (<= 1e-6), nll gradient vs central differences %.3g (<= 1e-4), %.2f s (< 30 s)",
             worst_post, worst_grad, elapsed));
}

// Blend cases evaluated by hand with T = [0, .5, 1] and s = [1, 0, .5].
void target_update_check(const std::shared_ptr<const SpectralGrid>& grid) {
  const auto v3 = [](double a, double b, double c) { return (Vector(3) << a, b, c).finished(); };
  const Vector T = v3(0, 0.5, 1), S = v3(1, 0, 0.5);
  struct Case {
    std::optional<Vector> target;
    double weight;
    Vector s;
    int vote;
    double pref;
    Vector want;
  };
  const std::vector<Case> cases = {
      {T, 1, S, 1, 0.0, T},
      {T, 1, S, 2, 1.0, S},
      {T, 3, S, 2, 0.5, v3(0.2, 0.0, 1.0)},
      {T, 1, S, 1, 0.5, v3(0.5, 0.0, 1.0)},
      {T, 2, S, 2, 0.25, v3(0.0, 0.2, 1.0)},
      {T, 1, S, 1, 0.75, v3(1.0, 0.0, 0.8)},
      {T, 4, S, 1, 0.5, v3(0.0, 2.0 / 7.0, 1.0)},
      {T, 5, S, 2, 0.5, v3(0.0, 0.125, 1.0)},
      {T, 3, S, 0, 0.7, T},
      {std::nullopt, 0, v3(2, 4, 6), 1, 0.3, T},
      {std::nullopt, 0, v3(6, 2, 4), 0, 0.5, Vector()},
  };
  double worst = 0.0;
  bool shape_ok = true;
  for (const auto& c : cases) {
    TargetState st;
    st.target = c.target;
    st.vote_weight = c.weight;
    st.phase = c.target ? Phase::HumanAugmented : Phase::Collecting;
    const TargetState out = record_vote(st, {0, 0}, c.s, Vote(c.vote), Preference(c.pref));
    if (c.want.size() == 0) {
      shape_ok = shape_ok && !out.target;
      continue;
    }
    if (!out.target) {
      shape_ok = false;
      continue;
    }
    worst = std::max(worst, (*out.target - c.want).cwiseAbs().maxCoeff());
  }

  std::vector<VoteDecision> votes(10, VoteDecision{2, 0.5});
  ReplayVoter voter(votes, {true});
  BOConfig cfg;
  cfg.iterations = 20;
  const RunRecord r = run_boars(cfg, grid, voter);
  int votes_before_freeze = -1, count = 0;
  for (const auto& ev : r.events) {
    if (ev.at("type") == "vote") ++count;
    if (ev.at("type") == "freeze") votes_before_freeze = count;
  }
  const bool ok = worst <= 1e-12 && shape_ok && r.frozen && votes_before_freeze == 10 && count == 10 &&
                  r.status == RunStatus::Finished;
  report(3, ok,
         fmt("%.0f hand-evaluated updates, max err %.3g; 10-vote replay froze after vote %.0f", double(cases.size()),
             worst, votes_before_freeze));

  // After the freeze every stored objective is the automated score and the
  // target never moves again.
  double y_err = 0.0;
  for (std::size_t i = 0; i < r.explored.size(); ++i)
    y_err = std::max(y_err, std::abs(r.objectives[i] - auto_objective(*r.final_target, grid->spectrum_at(r.explored[i]))));
  bool identical = true;
  int checked = 0;
  for (const auto& snap : r.targets)
    if (snap.iteration >= r.freeze_iteration) {
      identical = identical && snap.target && *snap.target == *r.final_target;
      ++checked;
    }
  bool recompute_ok = false;
  for (const auto& ev : r.events)
    if (ev.at("type") == "recompute") {
      const auto vals = ev.at("values").get<std::vector<double>>();
      recompute_ok = vals.size() == 10;
      for (std::size_t i = 0; i < vals.size() && recompute_ok; ++i)
        recompute_ok = vals[i] == auto_objective(*r.final_target, grid->spectrum_at(r.explored[i]));
    }
  report(4, y_err == 0.0 && identical && recompute_ok && checked == cfg.iterations,
         fmt("Y equals psi pointwise (max diff %.3g) over %.0f samples, target bit-identical across %.0f iterations",
             y_err, double(r.explored.size()), checked));
}

struct Arm {
  std::vector<double> deep, periodic, baseline;
};

void benchmark_check(RunRecord& explore_record) {
  const auto t0 = Clock::now();
  Arm mse;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticConfig sc;
    sc.correlation = 0.2;
    auto grid = std::make_shared<const SpectralGrid>(generate_synthetic_grid(sc, seed));
    BOConfig cfg;
    cfg.seed = seed;
    cfg.train.seed = seed;
    for (KernelKind kind : {KernelKind::Deep, KernelKind::Periodic}) {
      cfg.kernel = kind;
      ThresholdVoter voter;
      RunRecord r = run_boars(cfg, grid, voter);
      if (!r.frozen || !r.final_target) {
        std::printf("  seed %llu %s: target never frozen\n", static_cast<unsigned long long>(seed), to_string(kind));
        (kind == KernelKind::Deep ? mse.deep : mse.periodic).push_back(HUGE_VAL);
        continue;
      }
      const Vector truth = ground_truth_map(*grid, *r.final_target, cfg.window, cfg.ssim);
      const double m = *evaluate_run(r, truth).mse;
      (kind == KernelKind::Deep ? mse.deep : mse.periodic).push_back(m);
      if (kind == KernelKind::Deep) {
        const RunRecord base = random_baseline(cfg, grid, *r.final_target);
        mse.baseline.push_back(*evaluate_run(base, truth).mse);
        if (seed == 1) explore_record = r;
      }
      std::printf("  seed %llu %-8s mse %.5f (%.1f s)\n", static_cast<unsigned long long>(seed), to_string(kind), m,
                  r.runtime_seconds);
      std::fflush(stdout);
    }
    if (mse.baseline.size() == seed)
      std::printf("  seed %llu baseline mse %.5f\n", static_cast<unsigned long long>(seed), mse.baseline.back());
  }
  const double elapsed = seconds_since(t0);
  const double md = median(mse.deep), mp = median(mse.periodic);
  const double mb = mse.baseline.empty() ? -HUGE_VAL : median(mse.baseline);
  const bool time_ok = elapsed < 600.0;
  const bool all = md <= 0.08 && md <= mp && md <= mb && time_ok;
  std::printf("criterion 5: %s  median mse deep %.5f (<= 0.08), periodic %.5f (deep <= periodic), random baseline "
              "%.5f (BO <= baseline); %.0f s (< 600 s)\n",
              all ? "PASS" : "FAIL", md, mp, mb, elapsed);
  bool gated = gate("5a", md <= 0.08);
  gated = gate("5b", md <= mp) && gated;
  gated = gate("5c", md <= mb) && gated;
  gated = gate("5-runtime", time_ok) && gated;
  if (!gated) ++failures;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void cli_determinism_check() {
  const auto a = ts::temp_dir("accept_a"), b = ts::temp_dir("accept_b");
  int codes = 0;
  for (const auto& dir : {a, b}) {
    const std::string cmd = std::string(BOARS_CLI) + " --synthetic --seed 11 --out " + dir.string() + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    codes += WIFEXITED(rc) ? WEXITSTATUS(rc) : 1;
  }
  const std::string ra = slurp(a / "run.json"), rb = slurp(b / "run.json");
  const std::string ma = slurp(a / "maps" / "final.csv"), mb = slurp(b / "maps" / "final.csv");
  report(6, codes == 0 && !ra.empty() && !ma.empty() && ra == rb && ma == mb,
         fmt("two CLI runs: run.json identical %.0f, maps/final.csv identical %.0f (%.0f bytes)", ra == rb, ma == mb,
             double(ma.size())));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

std::size_t distinct(const std::vector<GridIndex>& v) { return std::set<GridIndex>(v.begin(), v.end()).size(); }

void budget_check(const RunRecord& benchmark_run) {
  SyntheticConfig sc;
  sc.height = 128;
  sc.width = 128;
  auto grid = std::make_shared<const SpectralGrid>(generate_synthetic_grid(sc, 7));
  BOConfig cfg;
  cfg.iterations = 100;
  cfg.seed = 7;
  cfg.train.seed = 7;
  ThresholdVoter voter;
  const RunRecord r = run_boars(cfg, grid, voter);
  const std::size_t large = r.status == RunStatus::Finished ? distinct(r.explored) : 0;
  const std::size_t small = benchmark_run.status == RunStatus::Finished ? distinct(benchmark_run.explored) : 0;
  report(7, large == 110 && small == 210,
         fmt("50x50 j=10 M=200 explored %.0f distinct (210); 128x128 j=10 M=100 explored %.0f distinct (110)",
             double(small), double(large)));
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--known-red") known_red.insert(argv[++i]);
  const auto t0 = Clock::now();
  try {
    ssim_oracle_check();
    gp_oracle_check();
    SyntheticConfig sc;
    target_update_check(std::make_shared<const SpectralGrid>(generate_synthetic_grid(sc, 3)));
    RunRecord benchmark_run;
    benchmark_check(benchmark_run);
    cli_determinism_check();
    budget_check(benchmark_run);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s (%d gating failures) in %.0f s\n", failures ? "FAILED" : "OK", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
