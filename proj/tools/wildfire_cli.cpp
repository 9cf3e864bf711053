#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "wildfire/sim_harness.hpp"

using namespace wildfire;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> robots;
  std::string mode;
  std::string out;
  std::optional<int> snapshot_every;
  std::optional<int> threads;
  bool dump_programs = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "TOML configuration (defaults when omitted)");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--robots", c.robots, "Team size")->check(CLI::NonNegativeNumber);
  app->add_option("--mode", c.mode, "Controller")->check(CLI::IsMember({"centralized", "decentralized", "none"}));
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--snapshot-every", c.snapshot_every, "Field snapshot period in ticks (0 = off)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--dump-programs", c.dump_programs, "Write every solved program to programs.jsonl");
}

SimConfig resolve(const Common& c) {
  SimConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.robots) cfg.robots = *c.robots;
  if (!c.mode.empty()) cfg.mode = parse_mode(c.mode);
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.snapshot_every) cfg.snapshot_every = *c.snapshot_every;
  if (c.threads) cfg.threads = *c.threads;
  if (c.dump_programs) cfg.dump_programs = true;
  cfg.validate();
  return cfg;
}

void print_summary(const RunSummary& s, const SimConfig& cfg) {
  std::printf("mode=%s robots=%d seed=%llu\n", to_string(cfg.mode), cfg.robots,
              static_cast<unsigned long long>(s.seed));
  std::printf("peak A_f      %.4f m^2 at t=%.2f s\n", s.peak_A_f, s.t_peak);
  if (s.t_extinct >= 0.0)
    std::printf("extinguished  t=%.2f s\n", s.t_extinct);
  else
    std::printf("extinguished  no (fire outlives the horizon)\n");
  std::printf("int A_f dt    %.4f m^2 s\n", s.integral_A_f);
  if (cfg.robots > 0) {
    std::printf("min E         %.4f\n", s.min_E);
    std::printf("min h_s       %.6g\n", s.min_h_s);
    std::printf("fallbacks     %d, plan failures %d\n", s.fallbacks, s.plan_failures);
    std::printf("charger visits");
    for (int v : s.charger_visits) std::printf(" %d", v);
    std::printf("\nsolve time    %.3g s mean over %ld solves\n", s.solve_time_mean, s.solves);
  }
  std::printf("wall time     %.2f s\n", s.wall_time);
  std::printf("status        %s\n", s.failed ? "FAILED" : "ok");
}

int cmd_run(const Common& c) {
  const SimConfig cfg = resolve(c);
  const RunResult r = run(cfg);
  print_summary(r.summary, cfg);
  return r.summary.failed ? 2 : 0;
}

int cmd_baseline(Common c) {
  c.robots = 0;
  c.mode = "none";
  return cmd_run(c);
}

int cmd_montecarlo(const Common& c, int runs) {
  SimConfig cfg = resolve(c);
  const MonteCarloResult mc = monte_carlo(cfg, runs, cfg.threads);
  if (!cfg.out_dir.empty()) write_monte_carlo(mc, cfg, cfg.out_dir);
  int failed = 0;
  std::printf("run  seed  peak_A_f  t_extinct  int_A_f  min_E  min_h_s  visits  status\n");
  for (std::size_t k = 0; k < mc.runs.size(); ++k) {
    const RunSummary& s = mc.runs[k];
    const int visits = s.charger_visits.empty() ? 0 : *std::min_element(s.charger_visits.begin(), s.charger_visits.end());
    std::printf("%3zu  %4llu  %8.4f  %9.2f  %7.3f  %5.3f  %8.3g  %6d  %s\n", k,
                static_cast<unsigned long long>(s.seed), s.peak_A_f, s.t_extinct, s.integral_A_f, s.min_E, s.min_h_s,
                visits, s.failed ? "FAILED" : "ok");
    failed += s.failed ? 1 : 0;
  }
  std::printf("%d/%d runs failed\n", failed, runs);
  return failed ? 2 : 0;
}

// Grid search over the energy rates: each candidate is scored by the
// fewest charger visits of any robot across `runs` seeds; runs that breach
// a barrier are rejected.
int cmd_calibrate(const Common& c, int runs, std::vector<double> c1s, std::vector<double> c2s,
                  std::vector<double> rcs, int target_visits) {
  SimConfig base = resolve(c);
  base.out_dir.clear();
  std::printf("c1      c2      r_charge  min_visits  failed  peak_A_f_mean\n");
  bool found = false;
  double best_c1 = 0, best_c2 = 0, best_rc = 0;
  int best_visits = -1;
  for (double c1 : c1s)
    for (double c2 : c2s)
      for (double rc : rcs) {
        SimConfig cfg = base;
        cfg.control.energy.c1 = c1;
        cfg.control.energy.c2 = c2;
        cfg.control.energy.r_charge = rc;
        const MonteCarloResult mc = monte_carlo(cfg, runs, cfg.threads);
        int min_visits = 1 << 30, failed = 0;
        double peak = 0.0;
        for (const auto& s : mc.runs) {
          for (int v : s.charger_visits) min_visits = std::min(min_visits, v);
          failed += s.failed ? 1 : 0;
          peak += s.peak_A_f / runs;
        }
        if (cfg.robots == 0) min_visits = 0;
        std::printf("%-7.4g %-7.4g %-9.4g %-11d %-7d %.4f\n", c1, c2, rc, min_visits, failed, peak);
        std::fflush(stdout);
        const bool ok = failed == 0 && min_visits >= target_visits;
        if (ok && (!found || min_visits < best_visits)) {
          found = true;
          best_visits = min_visits;
          best_c1 = c1;
          best_c2 = c2;
          best_rc = rc;
        }
      }
  if (!found) {
    std::printf("no candidate reached %d visits per robot without failures\n", target_visits);
    return 2;
  }
  std::printf("selected c1=%g c2=%g r_charge=%g (min visits %d)\n", best_c1, best_c2, best_rc, best_visits);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wildfire suppression swarm simulator"};
  app.require_subcommand(1);

  Common run_opts, base_opts, mc_opts, cal_opts;
  auto* run_cmd = app.add_subcommand("run", "Single closed-loop run");
  add_common(run_cmd, run_opts);
  auto* base_cmd = app.add_subcommand("baseline", "Fire only (no robots)");
  add_common(base_cmd, base_opts);

  int mc_runs = 100;
  auto* mc_cmd = app.add_subcommand("montecarlo", "Seeded batch with per-tick envelopes");
  add_common(mc_cmd, mc_opts);
  mc_cmd->add_option("--runs", mc_runs, "Number of runs")->check(CLI::PositiveNumber);

  int cal_runs = 3, cal_target = 2;
  std::vector<double> c1s{0.1, 0.2, 0.4}, c2s{0.02, 0.04, 0.06}, rcs{0.2, 0.3, 0.5};
  auto* cal_cmd = app.add_subcommand("calibrate", "Search energy rates for multiple charge cycles");
  add_common(cal_cmd, cal_opts);
  cal_cmd->add_option("--runs", cal_runs, "Seeds per candidate")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--visits", cal_target, "Required charger visits per robot");
  cal_cmd->add_option("--c1", c1s, "Candidate c1 values");
  cal_cmd->add_option("--c2", c2s, "Candidate c2 values");
  cal_cmd->add_option("--r-charge", rcs, "Candidate r_charge values");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*base_cmd) return cmd_baseline(base_opts);
    if (*mc_cmd) return cmd_montecarlo(mc_opts, mc_runs);
    if (*cal_cmd) return cmd_calibrate(cal_opts, cal_runs, c1s, c2s, rcs, cal_target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
