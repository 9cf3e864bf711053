#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "wildfire/sim_harness.hpp"

namespace wildfire {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t idx(long k) { return static_cast<std::size_t>(k); }

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out.precision(17);
  return out;
}

json path_json(const ChargePath& p) {
  json w = json::array();
  for (Vec2 v : p.waypoints) w.push_back({v.x, v.y});
  return {{"waypoints", w}, {"P", p.P}, {"u_plan", p.u_plan}};
}

json robot_json(const RobotState& r) {
  return {{"x_true", {r.x_true.x, r.x_true.y}},
          {"x_meas", {r.x_meas.x, r.x_meas.y}},
          {"E", r.E},
          {"w", r.w},
          {"last_u", {r.last_u.x, r.last_u.y}},
          {"last_f", r.last_f},
          {"in_charger", r.in_charger},
          {"docked", r.docked},
          {"charger_visits", r.charger_visits},
          {"path", path_json(r.path)}};
}

void write_postmortem(const World& w, const std::string& error, const fs::path& dir) {
  json j;
  j["error"] = error;
  j["tick"] = w.tick;
  j["t"] = static_cast<double>(w.tick) * w.cfg.dt;
  j["robots"] = json::array();
  for (const auto& r : w.robots) j["robots"].push_back(robot_json(r));
  j["events"] = w.events;
  j["T_max"] = w.fire.T.max();
  j["S_min"] = w.fire.S.min();
  open_out(dir / "postmortem.json") << j.dump(2) << '\n';
}

ScalarField team_density(const std::vector<RobotBelief>& beliefs, const GridSpec& g) {
  ScalarField rho(g, 0.0);
  for (const auto& b : beliefs) rho += b.field();
  return rho;
}

void snapshot(const World& w, const StepTrace& tr, const fs::path& dir) {
  const std::string stem = "t" + std::to_string(w.tick) + "_";
  const fs::path fields = dir / "fields";
  write_pgm(w.fire.T, (fields / (stem + "T.pgm")).string());
  write_pgm(w.fire.S, (fields / (stem + "S.pgm")).string(), 0.0, 1.0);
  write_pgm(team_density(tr.beliefs, w.grid), (fields / (stem + "rho.pgm")).string());
  const ScalarField rho_d = tr.rho_d.size() ? tr.rho_d : ScalarField(w.grid, 0.0);
  write_pgm(rho_d, (fields / (stem + "rho_d.pgm")).string());
}

json summary_json(const RunSummary& s) {
  return {{"seed", s.seed},
          {"peak_A_f", s.peak_A_f},
          {"t_peak", s.t_peak},
          {"t_extinct", s.t_extinct},
          {"integral_A_f", s.integral_A_f},
          {"min_E", s.min_E},
          {"min_h_s", s.min_h_s},
          {"failed", s.failed},
          {"fallbacks", s.fallbacks},
          {"plan_failures", s.plan_failures},
          {"charger_visits", s.charger_visits},
          {"solve_time_mean", s.solve_time_mean},
          {"solve_time_total", s.solve_time_total},
          {"solves", s.solves},
          {"wall_time", s.wall_time},
          {"energy_ledger_error", s.energy_ledger_error}};
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRecord>& metrics, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "tick,t,A_f,mean_E,min_E,min_h_s,min_h_E,water,slack,fallbacks,plan_failures,events\n";
  for (const auto& m : metrics)
    out << m.tick << ',' << m.t << ',' << m.A_f << ',' << m.mean_E << ',' << m.min_E << ',' << m.min_h_s << ','
        << m.min_h_E << ',' << m.water << ',' << m.slack << ',' << m.fallbacks << ',' << m.plan_failures << ','
        << m.events << '\n';
}

void write_pgm(const ScalarField& f, const std::string& path, double lo, double hi) {
  if (!(lo < hi)) {
    lo = f.min();
    hi = f.max();
  }
  const GridSpec& g = f.spec();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "P5\n" << g.nx << ' ' << g.ny << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  // Row 0 of the image is the top of the domain.
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = std::clamp((f(i, j) - lo) / span, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

RunSummary summarize(const std::vector<MetricsRecord>& metrics, const World& world, const SimConfig& cfg) {
  RunSummary s;
  s.seed = cfg.seed;
  s.min_E = std::numeric_limits<double>::infinity();
  s.min_h_s = std::numeric_limits<double>::infinity();
  bool burning = false;
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const MetricsRecord& m = metrics[k];
    if (m.A_f > s.peak_A_f) {
      s.peak_A_f = m.A_f;
      s.t_peak = m.t;
    }
    if (k > 0) s.integral_A_f += 0.5 * (m.A_f + metrics[k - 1].A_f) * cfg.dt;
    if (m.A_f > 0.0) burning = true;
    if (burning && m.A_f == 0.0 && s.t_extinct < 0.0) s.t_extinct = m.t;
    if (m.A_f > 0.0) s.t_extinct = -1.0;
    s.min_E = std::min(s.min_E, m.min_E);
    s.min_h_s = std::min(s.min_h_s, m.min_h_s);
    s.fallbacks += m.fallbacks;
    s.plan_failures += m.plan_failures;
    s.solve_time_total += m.solve_time_total;
    s.solves += m.solves;
  }
  if (!burning && !metrics.empty()) s.t_extinct = 0.0;
  for (const RobotState& r : world.robots) {
    s.charger_visits.push_back(r.charger_visits);
    s.energy_ledger_error = std::max(s.energy_ledger_error, std::abs(r.E - (r.E0 - r.drained + r.charged)));
  }
  if (!world.robots.empty() && s.solves > 0) s.solve_time_mean = s.solve_time_total / static_cast<double>(s.solves);
  s.failed = s.min_h_s < 0.0 || s.min_E < cfg.control.energy.E_min;
  return s;
}

RunResult run(const SimConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  World w = make_world(cfg);
  const long ticks = cfg.ticks();
  const bool writing = !cfg.out_dir.empty();
  const fs::path dir = cfg.out_dir;

  std::ofstream commands, programs, robots_csv;
  auto write_robots = [&](const World& world) {
    for (std::size_t i = 0; i < world.robots.size(); ++i) {
      const RobotState& r = world.robots[i];
      robots_csv << world.tick << ',' << i << ',' << r.x_true.x << ',' << r.x_true.y << ',' << r.x_meas.x << ','
                 << r.x_meas.y << ',' << r.E << ',' << r.w << ',' << r.path.P << ',' << (r.in_charger ? 1 : 0) << ','
                 << r.charger_visits << '\n';
    }
  };
  json paths = json::array();
  if (writing) {
    fs::create_directories(dir);
    if (cfg.snapshot_every > 0) fs::create_directories(dir / "fields");
    open_out(dir / "config.toml") << config_toml(cfg);
    robots_csv = open_out(dir / "robots.csv");
    robots_csv << "tick,robot,x,y,x_meas,y_meas,E,w,P,in_charger,visits\n";
    commands = open_out(dir / "commands.csv");
    write_command_header(commands);
    if (cfg.dump_programs) programs = open_out(dir / "programs.jsonl");
  }

  RunResult res;
  res.metrics.reserve(idx(ticks + 1));
  res.metrics.push_back(observe(w));
  auto record_paths = [&](const World& world) {
    for (std::size_t i = 0; i < world.robots.size(); ++i)
      paths.push_back({{"tick", world.tick}, {"robot", i}, {"path", path_json(world.robots[i].path)}});
  };
  if (writing) {
    record_paths(w);
    write_robots(w);
  }

  try {
    for (long k = 0; k < ticks; ++k) {
      StepTrace trace;
      trace.want_programs = writing && cfg.dump_programs;
      const bool snap = writing && cfg.snapshot_every > 0 && (k + 1) % cfg.snapshot_every == 0;
      const bool tracing = trace.want_programs || snap;
      std::vector<int> age_before;
      for (const auto& r : w.robots) age_before.push_back(r.plan_age);
      res.metrics.push_back(step(w, tracing ? &trace : nullptr));
      if (!writing) continue;
      for (const ControlCommand& c : w.last_commands) write_command(commands, w.tick, c);
      write_robots(w);
      for (const auto& p : trace.programs) programs << "{\"tick\":" << w.tick << ",\"program\":" << p << "}\n";
      for (std::size_t i = 0; i < w.robots.size(); ++i)
        if (w.robots[i].plan_age == 0 && age_before[i] != 0 && w.robots[i].path.waypoints.size() > 1)
          paths.push_back({{"tick", w.tick}, {"robot", i}, {"path", path_json(w.robots[i].path)}});
      if (snap) snapshot(w, trace, dir);
    }
  } catch (const std::exception& e) {
    if (writing) write_postmortem(w, e.what(), dir);
    throw;
  }

  res.summary = summarize(res.metrics, w, cfg);
  res.summary.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (writing) {
    write_metrics_csv(res.metrics, (dir / "metrics.csv").string());
    json j = summary_json(res.summary);
    j["mode"] = to_string(cfg.mode);
    j["robots"] = cfg.robots;
    j["ticks"] = ticks;
    j["target_gain"] = w.target_gain;
    j["clamps"] = {{"temperature_floor", w.clamps.temperature_floor},
                   {"fuel_floor", w.clamps.fuel_floor},
                   {"fuel_ceiling", w.clamps.fuel_ceiling}};
    j["events"] = w.events;
    open_out(dir / "summary.json") << j.dump(2) << '\n';
    open_out(dir / "paths.json") << paths.dump() << '\n';
  }
  res.final_world = std::move(w);
  return res;
}

MonteCarloResult monte_carlo(const SimConfig& cfg, int runs, int threads) {
  if (runs < 1) throw ConfigError("monte_carlo: runs must be at least 1");
  threads = std::max(1, std::min(threads, runs));
  std::vector<std::vector<MetricsRecord>> series(idx(runs));
  MonteCarloResult mc;
  mc.runs.resize(idx(runs));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int r = next++; r < runs; r = next++) {
      try {
        SimConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(r);
        c.out_dir.clear();
        RunResult res = run(c);
        mc.runs[idx(r)] = res.summary;
        series[idx(r)] = std::move(res.metrics);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  const std::size_t len = series[0].size();
  for (const auto& m : series[0]) mc.t.push_back(m.t);
  auto envelope = [&](auto get) {
    Envelope e;
    e.mean.assign(len, 0.0);
    e.min.assign(len, std::numeric_limits<double>::infinity());
    e.max.assign(len, -std::numeric_limits<double>::infinity());
    for (const auto& s : series)
      for (std::size_t k = 0; k < len; ++k) {
        const double v = get(s[k]);
        e.mean[k] += v;
        e.min[k] = std::min(e.min[k], v);
        e.max[k] = std::max(e.max[k], v);
      }
    for (double& v : e.mean) v /= static_cast<double>(series.size());
    return e;
  };
  mc.A_f = envelope([](const MetricsRecord& m) { return m.A_f; });
  mc.mean_E = envelope([](const MetricsRecord& m) { return m.mean_E; });
  mc.min_E = envelope([](const MetricsRecord& m) { return m.min_E; });
  mc.min_h_s = envelope([](const MetricsRecord& m) { return m.min_h_s; });
  mc.slack = envelope([](const MetricsRecord& m) { return m.slack; });
  return mc;
}

void write_monte_carlo(const MonteCarloResult& mc, const SimConfig& cfg, const std::string& dir_name) {
  const fs::path dir = dir_name;
  fs::create_directories(dir);
  open_out(dir / "config.toml") << config_toml(cfg);
  std::ofstream env = open_out(dir / "envelopes.csv");
  env << "t";
  for (const char* name : {"A_f", "mean_E", "min_E", "min_h_s", "slack"})
    env << ',' << name << "_mean," << name << "_min," << name << "_max";
  env << '\n';
  for (std::size_t k = 0; k < mc.t.size(); ++k) {
    env << mc.t[k];
    for (const Envelope* e : {&mc.A_f, &mc.mean_E, &mc.min_E, &mc.min_h_s, &mc.slack})
      env << ',' << e->mean[k] << ',' << e->min[k] << ',' << e->max[k];
    env << '\n';
  }
  json j;
  j["mode"] = to_string(cfg.mode);
  j["robots"] = cfg.robots;
  j["base_seed"] = cfg.seed;
  j["runs"] = json::array();
  int failed = 0;
  for (const auto& r : mc.runs) {
    j["runs"].push_back(summary_json(r));
    failed += r.failed ? 1 : 0;
  }
  j["failed_runs"] = failed;
  open_out(dir / "summary.json") << j.dump(2) << '\n';
}

}  // namespace wildfire
