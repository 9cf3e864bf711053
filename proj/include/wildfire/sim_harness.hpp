#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wildfire/charge_planner.hpp"
#include "wildfire/controllers.hpp"
#include "wildfire/fire_model.hpp"
#include "wildfire/local_knowledge.hpp"

namespace wildfire {

enum class ControlMode { kNone, kCentralized, kDecentralized };

const char* to_string(ControlMode m);
ControlMode parse_mode(const std::string& s);

struct FireSetup {
  FireParams params;  // wind is filled from `wind` when the world is built
  Vec2 wind;
  std::vector<Vec2> centers;
  double peak_excess = 3.0;  // K
  double radius = 0.2;       // m
  RegionThresholds thresholds;
};

struct SimConfig {
  double side = 4.0;
  double h = 0.1;
  double dt = 0.05;
  double horizon = 50.0;

  FireSetup fire;
  ChargerRegion charger;

  int robots = 4;
  ControlMode mode = ControlMode::kDecentralized;
  ControllerConfig control;
  // Target gain k_d; 0 derives it so the initial target mass is
  // target_mass * N * mean(w).
  double target_gain = 0.0;
  double target_mass = 1.0;
  double safety_margin = 0.0;  // m; the controllers' unsafe mask is A dilated by this

  double detection_radius = 1.1;  // m
  double comm_radius = 1.1;       // m
  double decay_rate = 0.05;       // 1/s

  PlannerParams planner;
  int replan_every = 20;  // ticks
  double r_proj = 0.3;    // m
  double neighbor_horizon = 1.0;  // s
  double planner_alpha = 1.0;     // 1/s

  // A robot whose estimate enters C parks at the charger center until both
  // battery and tank reach dock_release.
  double dock_release = 0.95;

  double E0_min = 0.6;
  double E0_max = 1.0;
  double spawn_clearance = 0.6;      // m from every fire center
  double spawn_max_distance = 1.4;   // m from the nearest fire center

  std::uint64_t seed = 1;
  int threads = 1;
  int snapshot_every = 0;  // ticks, 0 disables field snapshots
  std::string out_dir;     // empty: nothing written
  bool dump_programs = false;

  long ticks() const;
  GridSpec grid() const { return GridSpec::square(side, h); }
  void validate() const;
};

SimConfig default_config();
/// Defaults overridden by the keys present in a TOML file; unknown keys throw ConfigError.
SimConfig load_config(const std::string& path);
SimConfig parse_config(const std::string& toml_text);
/// The full configuration as TOML, each key annotated with its origin.
std::string config_toml(const SimConfig& cfg);

struct RobotState {
  Vec2 x_true;
  Vec2 x_meas;
  Vec2 x_belief;  // center of the propagated belief after the last move
  double E = 1.0;
  double w = 1.0;
  Vec2 last_u;
  double last_f = 0.0;
  LocalMap map;
  ChargePath path;
  bool has_path = false;
  int plan_age = 0;
  bool in_charger = false;  // x_true in C (drives charging)
  bool docked = false;      // parked at the charger until topped up
  int charger_visits = 0;   // docking sessions started

  // Battery ledger: E = E0 - drained + charged at all times.
  double E0 = 1.0;
  double drained = 0.0;
  double charged = 0.0;
};

struct MetricsRecord {
  long tick = 0;
  double t = 0.0;
  double A_f = 0.0;
  double mean_E = 0.0;
  double min_E = 0.0;
  double min_h_s = 0.0;  // team h_s on the true unsafe region
  double min_h_E = 0.0;
  double water = 0.0;    // total onboard water
  double slack = 0.0;    // largest CLF slack used this tick
  int fallbacks = 0;
  int plan_failures = 0;
  int solves = 0;
  double solve_time_mean = 0.0;  // s per solver call (not written to metrics.csv)
  double solve_time_total = 0.0;
  std::string events;
};

struct World {
  SimConfig cfg;
  GridSpec grid;
  FireState fire;
  ClampStats clamps;
  std::vector<RobotState> robots;
  CellMask last_unsafe;
  long tick = 0;
  double target_gain = 0.0;  // resolved k_d
  std::mt19937_64 rng;
  std::vector<ControlCommand> last_commands;
  std::vector<std::string> events;  // "t=<s> <text>"
};

World make_world(const SimConfig& cfg);

/// Optional sinks filled by step().
struct StepTrace {
  bool want_programs = false;
  std::vector<RobotBelief> beliefs;
  ScalarField rho_d;  // global target
  std::vector<std::string> programs;
};

/// Advances the world by one tick and returns the tick's metrics.
MetricsRecord step(World& world, StepTrace* trace = nullptr);

/// Metrics of the current state without advancing (used for t = 0).
MetricsRecord observe(const World& world);

struct RunSummary {
  std::uint64_t seed = 0;
  double peak_A_f = 0.0;
  double t_peak = 0.0;
  double t_extinct = -1.0;  // -1 when the fire outlives the horizon
  double integral_A_f = 0.0;
  double min_E = 1.0;
  double min_h_s = 0.0;
  bool failed = false;
  int fallbacks = 0;
  int plan_failures = 0;
  std::vector<int> charger_visits;
  double solve_time_mean = 0.0;  // s per solver call
  double solve_time_total = 0.0;
  long solves = 0;
  double wall_time = 0.0;
  double energy_ledger_error = 0.0;  // max |E - (E0 - drained + charged)|
};

struct RunResult {
  std::vector<MetricsRecord> metrics;
  RunSummary summary;
  World final_world;
};

/// Runs horizon/dt ticks. When cfg.out_dir is set, writes metrics.csv,
/// summary.json, commands.csv, paths.json, config.toml and optional snapshots.
RunResult run(const SimConfig& cfg);

struct Envelope {
  std::vector<double> mean, min, max;
};

struct MonteCarloResult {
  std::vector<RunSummary> runs;  // index = run number, seed = base + index
  std::vector<double> t;
  Envelope A_f, mean_E, min_E, min_h_s, slack;
};

MonteCarloResult monte_carlo(const SimConfig& cfg, int runs, int threads);
void write_monte_carlo(const MonteCarloResult& mc, const SimConfig& cfg, const std::string& dir);

void write_metrics_csv(const std::vector<MetricsRecord>& metrics, const std::string& path);
RunSummary summarize(const std::vector<MetricsRecord>& metrics, const World& world, const SimConfig& cfg);

/// Writes an 8-bit PGM scaled to [lo, hi] (min/max of the field when lo >= hi).
void write_pgm(const ScalarField& f, const std::string& path, double lo = 0.0, double hi = 0.0);

}  // namespace wildfire
