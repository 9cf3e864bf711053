#include "wildfire/charge_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wildfire/fire_model.hpp"
#include "wildfire/task_functions.hpp"

namespace wildfire {

void ChargerRegion::validate(const GridSpec& grid) const {
  if (!(radius > 0.0)) throw ConfigError("charger: radius must be positive");
  const Vec2 lo = grid.lower(), hi = grid.upper();
  if (center.x - radius < lo.x || center.x + radius > hi.x || center.y - radius < lo.y || center.y + radius > hi.y)
    throw ConfigError("charger: region must lie inside the domain");
}

void EnergyParams::validate() const {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("energy: c1 and c2 must be non-negative");
  if (!(E_min >= 0.0 && E_min < 1.0)) throw ConfigError("energy: E_min must lie in [0, 1)");
  if (!(r_charge >= 0.0)) throw ConfigError("energy: r_charge must be non-negative");
}

void PlannerParams::validate() const {
  if (!(u_plan > 0.0) || !(step_time > 0.0)) throw ConfigError("planner: u_plan and step_time must be positive");
  if (max_nodes < 1) throw ConfigError("planner: max_nodes must be positive");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw ConfigError("planner: goal_bias must lie in [0, 1]");
  if (scale_halvings < 0) throw ConfigError("planner: scale_halvings must be non-negative");
}

double ChargePath::length() const {
  double len = 0.0;
  for (std::size_t k = 1; k < waypoints.size(); ++k) len += distance(waypoints[k - 1], waypoints[k]);
  return len;
}

Vec2 ChargePath::heading() const {
  if (waypoints.size() < 2) return {};
  const Vec2 d = waypoints[1] - waypoints[0];
  const double n = norm(d);
  return n > 0.0 ? (1.0 / n) * d : Vec2{};
}

double path_energy(const ChargePath& path, const EnergyParams& energy, double u_plan) {
  return energy.rate_per_metre(u_plan) * path.length();
}

PathAdvance path_advance(const ChargePath& path, Vec2 x_new, const ChargerRegion& charger, double r_proj) {
  PathAdvance out;
  out.path.u_plan = path.u_plan;
  out.path.e_rate = path.e_rate;
  const auto& w = path.waypoints;
  if (charger.contains(x_new)) {
    out.path.waypoints = {x_new};
    return out;
  }
  if (w.empty()) {
    out.replan = true;
    out.path.waypoints = {x_new};
    return out;
  }

  // Closest point on the polyline; ties go to the later segment.
  std::size_t keep_from = w.size() - 1;
  double best = distance(x_new, w.back());
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    const Vec2 a = w[k], d = w[k + 1] - w[k];
    const double len2 = dot(d, d);
    const double t = len2 > 0.0 ? std::clamp(dot(x_new - a, d) / len2, 0.0, 1.0) : 0.0;
    const double dist = distance(x_new, a + t * d);
    if (dist <= best) {
      best = dist;
      keep_from = t >= 1.0 ? k + 2 : k + 1;
    }
  }
  keep_from = std::min(keep_from, w.size() - 1);
  // Waypoints closer than half the replan radius count as passed, so the
  // first segment is long enough that position noise cannot flip it.
  while (keep_from + 1 < w.size() && distance(x_new, w[keep_from]) < 0.5 * r_proj) ++keep_from;
  out.offset = best;
  out.replan = best > r_proj;
  out.path.waypoints.push_back(x_new);
  out.path.waypoints.insert(out.path.waypoints.end(), w.begin() + static_cast<std::ptrdiff_t>(keep_from), w.end());
  if (out.path.waypoints.size() >= 2 && distance(out.path.waypoints[0], out.path.waypoints[1]) == 0.0)
    out.path.waypoints.erase(out.path.waypoints.begin() + 1);
  out.path.P = out.path.e_rate * out.path.length();
  return out;
}

namespace {

double distance_to_mask(const CellMask& mask, Vec2 p) {
  const GridSpec& g = mask.spec();
  double best2 = std::numeric_limits<double>::infinity();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (mask(i, j)) {
        const Vec2 d = g.center(i, j) - p;
        best2 = std::min(best2, dot(d, d));
      }
  return std::sqrt(best2);
}

}  // namespace

WaypointCheck check_waypoint(const PlannerSafety& safety, const GridSpec& grid, Vec2 p, Vec2 u, double tau) {
  WaypointCheck out;
  if (safety.unsafe == nullptr || safety.unsafe->empty()) {
    out.h = safety.epsilon;
    out.margin = safety.alpha * out.h;
    return out;
  }
  const CellMask& A = *safety.unsafe;
  const double T = safety.density.diffusion_T;
  // A density and its operators vanish beyond this distance from its center.
  const double reach = kDensityCutoff * safety.density.sigma_loc + 2.0 * grid.h;
  const double d_own = distance_to_mask(A, grid.clamp(p));

  if (safety.neighbors.empty() && d_own > reach) {
    // Only the fixed density can touch A; the own terms are exactly zero.
    out.h = safety.epsilon;
    double others_drift = 0.0;
    if (safety.fixed.size() == grid.size()) {
      out.h -= inner(safety.fixed, safety.fixed, A);
      if (T > 0.0) others_drift = -2.0 * T * inner(safety.fixed, laplacian(safety.fixed), A);
    }
    out.margin = safety.alpha * out.h + others_drift;
    return out;
  }
  if (!safety.neighbors.empty() && d_own > reach) {
    const double t = std::min(tau, safety.neighbor_horizon);
    bool all_far = true;
    for (const PlannerNeighbor& n : safety.neighbors)
      all_far = all_far && distance_to_mask(A, grid.clamp(n.position + t * n.velocity)) > reach;
    if (all_far) {
      out.h = safety.epsilon;
      out.margin = safety.alpha * out.h;
      return out;
    }
  }

  const RobotBelief own = make_belief(grid.clamp(p), safety.density, grid);
  const RobotBelief* own_ptr = &own;

  if (safety.neighbors.empty()) {
    ScalarField rho = own.field();
    double others_drift = 0.0;
    if (safety.fixed.size() == rho.size()) {
      rho += safety.fixed;
      if (T > 0.0) others_drift = -2.0 * T * inner(rho, laplacian(safety.fixed), A);
    }
    const SafetyCbfEval ev = safety_cbf_eval(rho, std::span(&own_ptr, 1), A, safety.epsilon, T);
    out.h = ev.h;
    out.margin = safety.alpha * ev.h + dot(ev.lin_u[0], u) + ev.drift[0] + others_drift;
    return out;
  }

  const double t = std::min(tau, safety.neighbor_horizon);
  std::vector<RobotBelief> beliefs;
  beliefs.reserve(safety.neighbors.size());
  for (const PlannerNeighbor& n : safety.neighbors)
    beliefs.push_back(make_belief(grid.clamp(n.position + t * n.velocity), safety.density, grid));
  std::vector<const RobotBelief*> ptrs;
  for (const RobotBelief& b : beliefs) ptrs.push_back(&b);
  ScalarField rho = own.field();
  for (const RobotBelief& b : beliefs) rho += b.field();
  const SafetyCbfEval ev = safety_cbf_eval(rho, std::span(&own_ptr, 1), A, safety.epsilon, T);
  const double delta = worst_case_delta(rho, ptrs, A, safety.density.u_max, T);
  out.h = ev.h;
  out.margin = safety.alpha * ev.h + dot(ev.lin_u[0], u) + ev.drift[0] - delta;
  return out;
}

namespace {

struct Node {
  Vec2 p;
  int parent = -1;
  int depth = 0;
};

bool inside_goal(const ChargerRegion& c, Vec2 p, double margin) {
  return distance(p, c.center) <= std::max(0.0, c.radius - margin);
}

// Resamples a-b at spacing <= step and checks every interior and final point.
bool segment_ok(const PlannerSafety& safety, const GridSpec& grid, const PlannerParams& params, Vec2 a, Vec2 b,
                int depth0, std::vector<Vec2>* out) {
  const double len = distance(a, b);
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / params.step() - 1e-9)));
  const Vec2 d = (1.0 / pieces) * (b - a);
  const Vec2 v = (1.0 / params.step_time) * d;
  Vec2 cur = a;
  for (int k = 0; k < pieces; ++k) {
    const double tau = (depth0 + k) * params.step_time;
    if (check_waypoint(safety, grid, cur, v, tau).margin < 0.0) return false;
    const Vec2 next = k + 1 == pieces ? b : a + (k + 1.0) * d;
    if (!grid.contains(next)) return false;
    if (check_waypoint(safety, grid, next, {}, tau + params.step_time).h < 0.0) return false;
    if (out) out->push_back(next);
    cur = next;
  }
  return true;
}

}  // namespace

std::optional<ChargePath> rrt_plan(Vec2 start, const ChargerRegion& charger, const PlannerSafety& safety,
                                   const GridSpec& grid, const PlannerParams& params, const EnergyParams& energy,
                                   std::uint64_t seed) {
  ChargePath path;
  path.u_plan = params.u_plan;
  path.e_rate = energy.rate_per_metre(params.u_plan);
  if (charger.contains(start)) {
    path.waypoints = {start};
    return path;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec2 lo = grid.lower(), hi = grid.upper();
  const double goal_r = std::max(0.0, charger.radius - params.goal_margin);

  std::vector<Node> nodes{{start, -1, 0}};
  int reached = -1;
  // Rejected extensions do not grow the tree, so samples are capped too.
  // A tree that stops growing is boxed in; give up early.
  const long max_samples = 20L * params.max_nodes;
  const long max_stall = 500;
  long stall = 0;
  for (long sample_count = 0; sample_count < max_samples && stall < max_stall && reached < 0 &&
                              static_cast<int>(nodes.size()) < params.max_nodes;
       ++sample_count, ++stall) {
    Vec2 sample;
    if (unit(rng) < params.goal_bias) {
      const double r = goal_r * std::sqrt(unit(rng)), a = 2.0 * M_PI * unit(rng);
      sample = charger.center + Vec2{r * std::cos(a), r * std::sin(a)};
    } else {
      sample = {lo.x + (hi.x - lo.x) * unit(rng), lo.y + (hi.y - lo.y) * unit(rng)};
    }
    std::size_t near = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double d = distance(nodes[k].p, sample);
      if (d < best) {
        best = d;
        near = k;
      }
    }
    if (best < 1e-9) continue;
    const Node& from = nodes[near];
    const Vec2 full = (std::min(params.step(), best) / best) * (sample - from.p);
    for (int halving = 0; halving <= params.scale_halvings; ++halving) {
      const Vec2 disp = std::ldexp(1.0, -halving) * full;
      const Vec2 v = (1.0 / params.step_time) * disp;
      const Vec2 q = from.p + disp;
      if (!grid.contains(q)) continue;
      const double tau = from.depth * params.step_time;
      if (check_waypoint(safety, grid, from.p, v, tau).margin < 0.0) continue;
      if (check_waypoint(safety, grid, q, {}, tau + params.step_time).h < 0.0) continue;
      nodes.push_back({q, static_cast<int>(near), from.depth + 1});
      stall = 0;
      if (inside_goal(charger, q, params.goal_margin)) reached = static_cast<int>(nodes.size()) - 1;
      break;
    }
  }
  if (reached < 0) return std::nullopt;

  std::vector<Vec2> raw;
  for (int k = reached; k >= 0; k = nodes[static_cast<std::size_t>(k)].parent)
    raw.push_back(nodes[static_cast<std::size_t>(k)].p);
  std::reverse(raw.begin(), raw.end());

  // Greedy shortcut: head straight for the nearest goal point when the
  // checks allow it, else jump to the farthest accepted tree waypoint.
  std::vector<Vec2> smooth{raw.front()};
  std::size_t i = 0;
  bool ok = true;
  while (i + 1 < raw.size()) {
    std::vector<Vec2> piece;
    const double d_goal = distance(raw[i], charger.center);
    if (d_goal > goal_r) {
      const Vec2 goal = charger.center + (goal_r / d_goal) * (raw[i] - charger.center);
      if (segment_ok(safety, grid, params, raw[i], goal, static_cast<int>(smooth.size()) - 1, &piece)) {
        smooth.insert(smooth.end(), piece.begin(), piece.end());
        i = raw.size() - 1;
        break;
      }
    }
    std::size_t j = raw.size() - 1;
    for (; j > i; --j) {
      piece.clear();
      if (segment_ok(safety, grid, params, raw[i], raw[j], static_cast<int>(smooth.size()) - 1, &piece)) break;
    }
    if (j == i) {
      ok = false;
      break;
    }
    smooth.insert(smooth.end(), piece.begin(), piece.end());
    i = j;
  }
  path.waypoints = ok ? std::move(smooth) : std::move(raw);
  path.P = path_energy(path, energy, params.u_plan);
  return path;
}

bool verify_path(const ChargePath& path, const ChargerRegion& charger, const PlannerSafety& safety,
                 const GridSpec& grid, double max_gap) {
  const auto& w = path.waypoints;
  if (w.empty() || !charger.contains(w.back())) return false;
  const double step_time = max_gap / path.u_plan;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!grid.contains(w[k])) return false;
    if (k > 0 && check_waypoint(safety, grid, w[k], {}, k * step_time).h < 0.0) return false;
    if (k + 1 < w.size()) {
      const Vec2 d = w[k + 1] - w[k];
      if (norm(d) > max_gap * (1.0 + 1e-9)) return false;
      if (check_waypoint(safety, grid, w[k], (1.0 / step_time) * d, k * step_time).margin < 0.0) return false;
    }
  }
  return true;
}

}  // namespace wildfire
