#include "wildfire/conic_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wildfire {

ConvexProgram::ConvexProgram(int robots_, int flows_, bool has_slack_)
    : robots(robots_),
      flows(flows_),
      has_slack(has_slack_),
      u_max(static_cast<std::size_t>(robots_), 1.0),
      f_max(static_cast<std::size_t>(flows_), 1.0) {}

LinearRow& ConvexProgram::add_linear(std::string tag) {
  linear.push_back({std::vector<double>(static_cast<std::size_t>(dim()), 0.0), 0.0, std::move(tag)});
  return linear.back();
}

QuadraticRow& ConvexProgram::add_quadratic(int block, double quad, std::string tag) {
  quadratic.push_back({block, quad, std::vector<double>(static_cast<std::size_t>(dim()), 0.0), 0.0, std::move(tag)});
  return quadratic.back();
}

double ConvexProgram::objective(const std::vector<double>& x) const {
  double obj = 0.0;
  for (int i = 0; i < 2 * robots; ++i) obj += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  for (int j = 0; j < flows; ++j) {
    const double f = x[static_cast<std::size_t>(f_index(j))];
    obj += zeta * f * f;
  }
  if (has_slack) obj += gamma * x[static_cast<std::size_t>(s_index())];
  for (std::size_t i = 0; i < linear_cost.size(); ++i) obj += linear_cost[i] * x[i];
  return obj;
}

void ConvexProgram::validate() const {
  if (robots < 0 || flows < 0) throw std::invalid_argument("program: negative block count");
  if (u_max.size() != static_cast<std::size_t>(robots) || f_max.size() != static_cast<std::size_t>(flows))
    throw std::invalid_argument("program: bound vectors do not match block counts");
  if (zeta < 0.0 || gamma < 0.0) throw std::invalid_argument("program: objective weights must be non-negative");
  for (double b : u_max)
    if (!(b >= 0.0)) throw std::invalid_argument("program: u_max must be non-negative");
  for (double b : f_max)
    if (!(b >= 0.0)) throw std::invalid_argument("program: f_max must be non-negative");
  const auto n = static_cast<std::size_t>(dim());
  if (!linear_cost.empty() && linear_cost.size() != n) throw std::invalid_argument("program: linear cost has wrong width");
  for (const LinearRow& r : linear)
    if (r.coeffs.size() != n) throw std::invalid_argument("program: linear row has wrong width");
  for (const QuadraticRow& r : quadratic) {
    if (r.coeffs.size() != n) throw std::invalid_argument("program: quadratic row has wrong width");
    if (r.block < 0 || r.block >= robots) throw std::invalid_argument("program: quadratic row block out of range");
    if (!(r.quad >= 0.0)) throw std::invalid_argument("program: quadratic row is not convex");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kOptimalLoose: return "optimal-loose";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kMaxIter: return "max-iter";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cone layout: `lp` nonnegative rows first, then second-order cones
// {(t, v) : |v| <= t} of the listed sizes.
struct Cones {
  int lp = 0;
  std::vector<int> soc;

  int rows() const {
    int m = lp;
    for (int d : soc) m += d;
    return m;
  }
  int degree() const { return lp + static_cast<int>(soc.size()); }
};

// Inequality-form conic LP: min c'x s.t. Gx + s = h, s in K.
struct ConicLp {
  MatrixXd G;
  VectorXd h;
  VectorXd c;
  Cones cones;
};

// Where each original constraint lives in the conic LP, for multiplier recovery.
struct RowMap {
  std::vector<int> linear;  // -1 when the row was dropped as trivially satisfied
  std::vector<double> linear_scale;
  std::vector<int> quadratic;  // first row of the cone
  std::vector<double> quadratic_scale;
  std::vector<int> ball;
  std::vector<int> flow_lower, flow_upper;
  int slack_lower = -1;
  bool has_epigraph = false;
};

double row_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

// Builds the conic form. Returns false when a constant row is violated.
bool build_conic(const ConvexProgram& p, ConicLp& lp, RowMap& map, double& const_violation) {
  const int nx = p.dim();
  map.has_epigraph = p.robots + p.flows > 0;
  const int n = nx + (map.has_epigraph ? 1 : 0);
  const int t_col = nx;

  struct Row {
    VectorXd g;
    double h;
  };
  std::vector<Row> lp_rows;
  auto new_row = [n]() { return Row{VectorXd::Zero(n), 0.0}; };

  const_violation = 0.0;
  map.linear.assign(p.linear.size(), -1);
  map.linear_scale.assign(p.linear.size(), 1.0);
  for (std::size_t k = 0; k < p.linear.size(); ++k) {
    const LinearRow& r = p.linear[k];
    const double scale = row_norm(r.coeffs);
    // Rows this flat are constants: normalizing them would put |rhs|/scale
    // into the cone data and wreck the conditioning.
    if (scale <= 1e-9 * std::max(1.0, std::abs(r.rhs))) {
      if (r.rhs < 0.0) const_violation = std::max(const_violation, -r.rhs);
      continue;
    }
    Row row = new_row();
    for (int i = 0; i < nx; ++i) row.g[i] = r.coeffs[static_cast<std::size_t>(i)] / scale;
    row.h = r.rhs / scale;
    map.linear[k] = static_cast<int>(lp_rows.size());
    map.linear_scale[k] = scale;
    lp_rows.push_back(std::move(row));
  }
  for (int j = 0; j < p.flows; ++j) {
    Row lo = new_row();
    lo.g[p.f_index(j)] = -1.0;
    map.flow_lower.push_back(static_cast<int>(lp_rows.size()));
    lp_rows.push_back(std::move(lo));
    Row hi = new_row();
    hi.g[p.f_index(j)] = 1.0;
    hi.h = p.f_max[static_cast<std::size_t>(j)];
    map.flow_upper.push_back(static_cast<int>(lp_rows.size()));
    lp_rows.push_back(std::move(hi));
  }
  if (p.has_slack) {
    Row lo = new_row();
    lo.g[p.s_index()] = -1.0;
    map.slack_lower = static_cast<int>(lp_rows.size());
    lp_rows.push_back(std::move(lo));
  }
  if (const_violation > 0.0) return false;

  std::vector<std::vector<Row>> socs;
  // Epigraph |u|^2 + zeta |f|^2 <= t as |(2u, 2 sqrt(zeta) f, t - 1)| <= t + 1.
  if (map.has_epigraph) {
    std::vector<Row> cone;
    Row top = new_row();
    top.g[t_col] = -1.0;
    top.h = 1.0;
    cone.push_back(std::move(top));
    for (int i = 0; i < 2 * p.robots; ++i) {
      Row r = new_row();
      r.g[i] = -2.0;
      cone.push_back(std::move(r));
    }
    const double fz = 2.0 * std::sqrt(p.zeta);
    for (int j = 0; j < p.flows; ++j) {
      Row r = new_row();
      r.g[p.f_index(j)] = -fz;
      cone.push_back(std::move(r));
    }
    Row last = new_row();
    last.g[t_col] = -1.0;
    last.h = -1.0;
    cone.push_back(std::move(last));
    socs.push_back(std::move(cone));
  }
  int soc_row = static_cast<int>(lp_rows.size());
  if (map.has_epigraph) soc_row += static_cast<int>(socs.back().size());

  for (int b = 0; b < p.robots; ++b) {
    std::vector<Row> cone;
    Row top = new_row();
    top.h = p.u_max[static_cast<std::size_t>(b)];
    cone.push_back(std::move(top));
    for (int d = 0; d < 2; ++d) {
      Row r = new_row();
      r.g[p.u_index(b) + d] = -1.0;
      cone.push_back(std::move(r));
    }
    map.ball.push_back(soc_row);
    soc_row += 3;
    socs.push_back(std::move(cone));
  }
  // quad |u_b|^2 + a.x <= rhs with y = rhs - a.x: |(2 sqrt(quad) u_b, y - 1)| <= y + 1.
  for (const QuadraticRow& q : p.quadratic) {
    const double scale = std::max(q.quad, row_norm(q.coeffs)) > 0.0 ? std::max(q.quad, row_norm(q.coeffs)) : 1.0;
    const double quad = q.quad / scale;
    std::vector<Row> cone;
    Row top = new_row();
    for (int i = 0; i < nx; ++i) top.g[i] = q.coeffs[static_cast<std::size_t>(i)] / scale;
    top.h = q.rhs / scale + 1.0;
    Row last = top;
    last.h = q.rhs / scale - 1.0;
    cone.push_back(std::move(top));
    for (int d = 0; d < 2; ++d) {
      Row r = new_row();
      r.g[p.u_index(q.block) + d] = -2.0 * std::sqrt(quad);
      cone.push_back(std::move(r));
    }
    cone.push_back(std::move(last));
    map.quadratic.push_back(soc_row);
    map.quadratic_scale.push_back(scale);
    soc_row += 4;
    socs.push_back(std::move(cone));
  }

  lp.cones.lp = static_cast<int>(lp_rows.size());
  lp.cones.soc.clear();
  for (const auto& cone : socs) lp.cones.soc.push_back(static_cast<int>(cone.size()));
  const int m = lp.cones.rows();
  lp.G = MatrixXd::Zero(m, n);
  lp.h = VectorXd::Zero(m);
  int r = 0;
  for (const Row& row : lp_rows) {
    lp.G.row(r) = row.g.transpose();
    lp.h[r++] = row.h;
  }
  for (const auto& cone : socs) {
    for (const Row& row : cone) {
      lp.G.row(r) = row.g.transpose();
      lp.h[r++] = row.h;
    }
  }
  lp.c = VectorXd::Zero(n);
  if (map.has_epigraph) lp.c[t_col] = 1.0;
  if (p.has_slack) lp.c[p.s_index()] = p.gamma;
  for (std::size_t i = 0; i < p.linear_cost.size(); ++i) lp.c[static_cast<Eigen::Index>(i)] += p.linear_cost[i];
  return true;
}

// ---- Cone algebra ---------------------------------------------------------

// Jordan product u o v.
VectorXd jordan(const Cones& K, const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  for (int i = 0; i < K.lp; ++i) out[i] = u[i] * v[i];
  int off = K.lp;
  for (int d : K.soc) {
    out[off] = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) + v[off] * u.segment(off + 1, d - 1);
    off += d;
  }
  return out;
}

// Solves lambda o x = d for x.
VectorXd jordan_div(const Cones& K, const VectorXd& lambda, const VectorXd& d) {
  VectorXd out(d.size());
  for (int i = 0; i < K.lp; ++i) out[i] = d[i] / lambda[i];
  int off = K.lp;
  for (int dim : K.soc) {
    const double l0 = lambda[off];
    const auto l1 = lambda.segment(off + 1, dim - 1);
    const double d0 = d[off];
    const auto d1 = d.segment(off + 1, dim - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * d0 - l1.dot(d1)) / det;
    out[off] = x0;
    out.segment(off + 1, dim - 1) = (d1 - x0 * l1) / l0;
    off += dim;
  }
  return out;
}

VectorXd identity(const Cones& K) {
  VectorXd e = VectorXd::Zero(K.rows());
  for (int i = 0; i < K.lp; ++i) e[i] = 1.0;
  int off = K.lp;
  for (int d : K.soc) {
    e[off] = 1.0;
    off += d;
  }
  return e;
}

// Smallest alpha with v + alpha e in K; negative when v is interior.
double boundary_shift(const Cones& K, const VectorXd& v) {
  double a = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < K.lp; ++i) a = std::max(a, -v[i]);
  int off = K.lp;
  for (int d : K.soc) {
    a = std::max(a, v.segment(off + 1, d - 1).norm() - v[off]);
    off += d;
  }
  return a;
}

// Largest alpha (capped) such that v + alpha dv stays in K.
double max_step(const Cones& K, const VectorXd& v, const VectorXd& dv, double cap) {
  double alpha = cap;
  for (int i = 0; i < K.lp; ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  int off = K.lp;
  for (int d : K.soc) {
    const double v0 = v[off], d0 = dv[off];
    const auto v1 = v.segment(off + 1, d - 1);
    const auto d1 = dv.segment(off + 1, d - 1);
    const double qa = d0 * d0 - d1.squaredNorm();
    const double qb = v0 * d0 - v1.dot(d1);
    const double qc = std::max(0.0, v0 * v0 - v1.squaredNorm());
    double root = std::numeric_limits<double>::infinity();
    if (std::abs(qa) < 1e-300) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else {
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -(qb + (qb >= 0.0 ? sq : -sq));
        for (double r : {q / qa, q != 0.0 ? qc / q : std::numeric_limits<double>::infinity()})
          if (r > 0.0) root = std::min(root, r);
      }
    }
    // The t >= 0 half-space also bounds the step (only binding off the cone surface).
    if (d0 < 0.0) root = std::min(root, -v0 / d0);
    alpha = std::min(alpha, root);
    off += d;
  }
  return std::max(alpha, 0.0);
}

// Nesterov-Todd scaling: symmetric block-diagonal W with W z = W^{-1} s = lambda.
struct Scaling {
  MatrixXd W;
  MatrixXd Winv;
  VectorXd lambda;
};

Scaling nt_scaling(const Cones& K, const VectorXd& s, const VectorXd& z) {
  const int m = K.rows();
  Scaling sc{MatrixXd::Zero(m, m), MatrixXd::Zero(m, m), VectorXd(m)};
  for (int i = 0; i < K.lp; ++i) {
    const double w = std::sqrt(s[i] / z[i]);
    sc.W(i, i) = w;
    sc.Winv(i, i) = 1.0 / w;
  }
  int off = K.lp;
  for (int d : K.soc) {
    const VectorXd sv = s.segment(off, d), zv = z.segment(off, d);
    const double s_res = std::sqrt(std::max(sv[0] * sv[0] - sv.tail(d - 1).squaredNorm(), 1e-300));
    const double z_res = std::sqrt(std::max(zv[0] * zv[0] - zv.tail(d - 1).squaredNorm(), 1e-300));
    const VectorXd sb = sv / s_res, zb = zv / z_res;
    const double gam = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    VectorXd wb(d);
    wb[0] = (sb[0] + zb[0]) / (2.0 * gam);
    wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gam);
    const double eta = std::sqrt(s_res / z_res);
    MatrixXd block(d, d);
    const VectorXd w1 = wb.tail(d - 1);
    block(0, 0) = wb[0];
    block.block(0, 1, 1, d - 1) = w1.transpose();
    block.block(1, 0, d - 1, 1) = w1;
    block.block(1, 1, d - 1, d - 1) = MatrixXd::Identity(d - 1, d - 1) + w1 * w1.transpose() / (1.0 + wb[0]);
    MatrixXd inv = block;
    inv.block(0, 1, 1, d - 1) *= -1.0;
    inv.block(1, 0, d - 1, 1) *= -1.0;
    sc.W.block(off, off, d, d) = eta * block;
    sc.Winv.block(off, off, d, d) = inv / eta;
    off += d;
  }
  sc.lambda = sc.W * z;
  return sc;
}

// Reduced KKT system [0 G'; G -W^2] [dx; dz] = [r1; r2] via normal equations.
class KktSolver {
 public:
  KktSolver(const MatrixXd& G, const Scaling& sc) : G_(G), sc_(sc) {
    Gs_ = sc.Winv * G;
    MatrixXd M = Gs_.transpose() * Gs_;
    M.diagonal().array() += 1e-14 * (1.0 + M.diagonal().array().abs());
    llt_.compute(M);
  }

  void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dz) const {
    const VectorXd wr2 = sc_.Winv * r2;
    dx = llt_.solve(r1 + Gs_.transpose() * wr2);
    dz = sc_.Winv * (Gs_ * dx - wr2);
    // One round of iterative refinement on the full system.
    const VectorXd e1 = r1 - G_.transpose() * dz;
    const VectorXd e2 = r2 - (G_ * dx - sc_.W * (sc_.W * dz));
    const VectorXd we2 = sc_.Winv * e2;
    const VectorXd cx = llt_.solve(e1 + Gs_.transpose() * we2);
    dx += cx;
    dz += sc_.Winv * (Gs_ * cx - we2);
  }

 private:
  const MatrixXd& G_;
  const Scaling& sc_;
  MatrixXd Gs_;
  Eigen::LLT<MatrixXd> llt_;
};

enum class ConicStatus { kOptimal, kPrimalInfeasible, kDualInfeasible, kMaxIter };

struct ConicResult {
  ConicStatus status = ConicStatus::kMaxIter;
  VectorXd x, s, z;
  double certificate = 0.0;
  int iterations = 0;
};

// Homogeneous self-dual embedding with Mehrotra predictor-corrector.
ConicResult solve_conic(const ConicLp& lp, double tol, int max_iter) {
  const Cones& K = lp.cones;
  const MatrixXd& G = lp.G;
  const VectorXd& h = lp.h;
  const VectorXd& c = lp.c;
  const int n = static_cast<int>(G.cols());
  const int m = static_cast<int>(G.rows());
  const VectorXd e = identity(K);
  const double hnorm = std::max(1.0, h.norm());
  const double cnorm = std::max(1.0, c.norm());

  // Initial point from the least-squares primal and dual problems.
  Eigen::LDLT<MatrixXd> ls((G.transpose() * G + 1e-12 * MatrixXd::Identity(n, n)).eval());
  VectorXd x = ls.solve(G.transpose() * h);
  VectorXd s = h - G * x;
  VectorXd z = -G * ls.solve(c);
  double shift = boundary_shift(K, s);
  if (shift >= 0.0) s += (1.0 + shift) * e;
  shift = boundary_shift(K, z);
  if (shift >= 0.0) z += (1.0 + shift) * e;
  double tau = 1.0, kappa = 1.0;

  ConicResult res;
  for (int it = 0; it <= max_iter; ++it) {
    res.iterations = it;
    const VectorXd rx = G.transpose() * z + c * tau;
    const VectorXd rz = s + G * x - h * tau;
    const double rt = kappa + c.dot(x) + h.dot(z);

    const double pres = (G * x + s - h * tau).norm() / tau / hnorm;
    const double dres = rx.norm() / tau / cnorm;
    const double gap = s.dot(z) / (tau * tau);
    const double pcost = c.dot(x) / tau;
    const double dcost = -h.dot(z) / tau;
    const double relgap = gap / std::max(1e-300, std::min(std::abs(pcost), std::abs(dcost)));
    if (pres < tol && dres < tol && (gap < tol || relgap < tol)) {
      res.status = ConicStatus::kOptimal;
      res.x = x / tau;
      res.s = s / tau;
      res.z = z / tau;
      return res;
    }
    const double hz = h.dot(z);
    if (hz < 0.0) {
      const double cert = (G.transpose() * z).norm() / -hz;
      if (cert < tol) {
        res.status = ConicStatus::kPrimalInfeasible;
        res.certificate = cert;
        res.z = z / -hz;
        res.x = x / tau;
        res.s = s / tau;
        return res;
      }
    }
    const double cx = c.dot(x);
    if (cx < 0.0) {
      const double cert = (G * x + s).norm() / -cx;
      if (cert < tol) {
        res.status = ConicStatus::kDualInfeasible;
        res.certificate = cert;
        res.x = x / -cx;
        return res;
      }
    }
    if (it == max_iter) break;

    const Scaling sc = nt_scaling(K, s, z);
    const KktSolver kkt(G, sc);
    const double mu = (s.dot(z) + tau * kappa) / (K.degree() + 1);

    VectorXd x1, z1;
    kkt.solve(-c, h, x1, z1);
    const double denom_base = -c.dot(x1) - h.dot(z1);

    struct Dir {
      VectorXd dx, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](const VectorXd& dxr, const VectorXd& dzr, double dtr, const VectorXd& dsr, double dkr) {
      const VectorXd ldiv = jordan_div(K, sc.lambda, dsr);
      const VectorXd wl = sc.W * ldiv;
      VectorXd x2, z2;
      kkt.solve(-dxr, -dzr + wl, x2, z2);
      Dir d;
      d.dtau = (dtr - dkr / tau + c.dot(x2) + h.dot(z2)) / (kappa / tau + denom_base);
      d.dx = x2 + d.dtau * x1;
      d.dz = z2 + d.dtau * z1;
      d.ds = -wl - sc.W * (sc.W * d.dz);
      d.dkappa = (-dkr - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Dir& d, double cap) {
      double a = std::min(max_step(K, s, d.ds, cap), max_step(K, z, d.dz, cap));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Dir aff = direction(rx, rz, rt, jordan(K, sc.lambda, sc.lambda), kappa * tau);
    const double alpha_aff = step_length(aff, 1.0);
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // Corrector.
    const VectorXd ws = sc.Winv * aff.ds;
    const VectorXd wz = sc.W * aff.dz;
    const VectorXd ds_comb = jordan(K, sc.lambda, sc.lambda) + jordan(K, ws, wz) - sigma * mu * e;
    const double dk_comb = kappa * tau + aff.dkappa * aff.dtau - sigma * mu;
    const Dir d = direction((1.0 - sigma) * rx, (1.0 - sigma) * rz, (1.0 - sigma) * rt, ds_comb, dk_comb);
    const double alpha = std::min(1.0, 0.99 * step_length(d, 1e6));
    if (!(alpha > 1e-14) || !d.dx.allFinite()) break;

    x += alpha * d.dx;
    s += alpha * d.ds;
    z += alpha * d.dz;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
    (void)m;
  }
  res.status = ConicStatus::kMaxIter;
  res.x = x / tau;
  res.s = s / tau;
  res.z = z / tau;
  return res;
}

double positive(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

double primal_violation(const ConvexProgram& p, const std::vector<double>& x) {
  double viol = 0.0;
  auto at = [&](int i) { return x[static_cast<std::size_t>(i)]; };
  for (const LinearRow& r : p.linear) {
    double lhs = 0.0;
    for (int i = 0; i < p.dim(); ++i) lhs += r.coeffs[static_cast<std::size_t>(i)] * at(i);
    viol = std::max(viol, positive(lhs - r.rhs));
  }
  for (const QuadraticRow& r : p.quadratic) {
    double lhs = 0.0;
    for (int i = 0; i < p.dim(); ++i) lhs += r.coeffs[static_cast<std::size_t>(i)] * at(i);
    const double ux = at(p.u_index(r.block)), uy = at(p.u_index(r.block) + 1);
    lhs += r.quad * (ux * ux + uy * uy);
    viol = std::max(viol, positive(lhs - r.rhs));
  }
  for (int b = 0; b < p.robots; ++b) {
    const double un = std::hypot(at(p.u_index(b)), at(p.u_index(b) + 1));
    viol = std::max(viol, positive(un - p.u_max[static_cast<std::size_t>(b)]));
  }
  for (int j = 0; j < p.flows; ++j) {
    viol = std::max(viol, positive(-at(p.f_index(j))));
    viol = std::max(viol, positive(at(p.f_index(j)) - p.f_max[static_cast<std::size_t>(j)]));
  }
  if (p.has_slack) viol = std::max(viol, positive(-at(p.s_index())));
  return viol;
}

namespace {

// Original constraints in a canonical order as g_k(x) <= 0 with gradients.
struct ConstraintEval {
  double g = 0.0;
  std::vector<double> grad;
};

enum class RowKind { kLinear, kQuadratic, kBall, kFlowLower, kFlowUpper, kSlackLower };

struct RowRef {
  RowKind kind;
  std::size_t index;
};

std::vector<RowRef> canonical_rows(const ConvexProgram& p) {
  std::vector<RowRef> rows;
  for (std::size_t k = 0; k < p.linear.size(); ++k) rows.push_back({RowKind::kLinear, k});
  for (std::size_t k = 0; k < p.quadratic.size(); ++k) rows.push_back({RowKind::kQuadratic, k});
  for (int b = 0; b < p.robots; ++b) rows.push_back({RowKind::kBall, static_cast<std::size_t>(b)});
  for (int j = 0; j < p.flows; ++j) rows.push_back({RowKind::kFlowLower, static_cast<std::size_t>(j)});
  for (int j = 0; j < p.flows; ++j) rows.push_back({RowKind::kFlowUpper, static_cast<std::size_t>(j)});
  if (p.has_slack) rows.push_back({RowKind::kSlackLower, 0});
  return rows;
}

ConstraintEval evaluate(const ConvexProgram& p, const RowRef& ref, const std::vector<double>& x) {
  const auto n = static_cast<std::size_t>(p.dim());
  ConstraintEval ev{0.0, std::vector<double>(n, 0.0)};
  auto at = [&](int i) { return x[static_cast<std::size_t>(i)]; };
  switch (ref.kind) {
    case RowKind::kLinear: {
      const LinearRow& r = p.linear[ref.index];
      ev.g = -r.rhs;
      for (std::size_t i = 0; i < n; ++i) {
        ev.g += r.coeffs[i] * x[i];
        ev.grad[i] = r.coeffs[i];
      }
      break;
    }
    case RowKind::kQuadratic: {
      const QuadraticRow& r = p.quadratic[ref.index];
      const int ub = p.u_index(r.block);
      ev.g = -r.rhs + r.quad * (at(ub) * at(ub) + at(ub + 1) * at(ub + 1));
      for (std::size_t i = 0; i < n; ++i) {
        ev.g += r.coeffs[i] * x[i];
        ev.grad[i] = r.coeffs[i];
      }
      ev.grad[static_cast<std::size_t>(ub)] += 2.0 * r.quad * at(ub);
      ev.grad[static_cast<std::size_t>(ub + 1)] += 2.0 * r.quad * at(ub + 1);
      break;
    }
    case RowKind::kBall: {
      const int ub = p.u_index(static_cast<int>(ref.index));
      const double un = std::hypot(at(ub), at(ub + 1));
      ev.g = un - p.u_max[ref.index];
      if (un > 0.0) {
        ev.grad[static_cast<std::size_t>(ub)] = at(ub) / un;
        ev.grad[static_cast<std::size_t>(ub + 1)] = at(ub + 1) / un;
      }
      break;
    }
    case RowKind::kFlowLower: {
      const int fi = p.f_index(static_cast<int>(ref.index));
      ev.g = -at(fi);
      ev.grad[static_cast<std::size_t>(fi)] = -1.0;
      break;
    }
    case RowKind::kFlowUpper: {
      const int fi = p.f_index(static_cast<int>(ref.index));
      ev.g = at(fi) - p.f_max[ref.index];
      ev.grad[static_cast<std::size_t>(fi)] = 1.0;
      break;
    }
    case RowKind::kSlackLower: {
      ev.g = -at(p.s_index());
      ev.grad[static_cast<std::size_t>(p.s_index())] = -1.0;
      break;
    }
  }
  return ev;
}

double& multiplier(Multipliers& m, const RowRef& ref) {
  switch (ref.kind) {
    case RowKind::kLinear: return m.linear[ref.index];
    case RowKind::kQuadratic: return m.quadratic[ref.index];
    case RowKind::kBall: return m.ball[ref.index];
    case RowKind::kFlowLower: return m.flow_lower[ref.index];
    case RowKind::kFlowUpper: return m.flow_upper[ref.index];
    case RowKind::kSlackLower: return m.slack_lower;
  }
  return m.slack_lower;
}

void size_multipliers(const ConvexProgram& p, Multipliers& m) {
  m.linear.resize(p.linear.size(), 0.0);
  m.quadratic.resize(p.quadratic.size(), 0.0);
  m.ball.resize(static_cast<std::size_t>(p.robots), 0.0);
  m.flow_lower.resize(static_cast<std::size_t>(p.flows), 0.0);
  m.flow_upper.resize(static_cast<std::size_t>(p.flows), 0.0);
}

std::vector<double> objective_gradient(const ConvexProgram& p, const std::vector<double>& x) {
  std::vector<double> grad(static_cast<std::size_t>(p.dim()), 0.0);
  for (int i = 0; i < 2 * p.robots; ++i) grad[static_cast<std::size_t>(i)] = 2.0 * x[static_cast<std::size_t>(i)];
  for (int j = 0; j < p.flows; ++j)
    grad[static_cast<std::size_t>(p.f_index(j))] = 2.0 * p.zeta * x[static_cast<std::size_t>(p.f_index(j))];
  if (p.has_slack) grad[static_cast<std::size_t>(p.s_index())] = p.gamma;
  for (std::size_t i = 0; i < p.linear_cost.size(); ++i) grad[i] += p.linear_cost[i];
  return grad;
}

// Lawson-Hanson non-negative least squares: min |A l - b| s.t. l >= 0.
VectorXd nnls(const MatrixXd& A, const VectorXd& b) {
  const int k = static_cast<int>(A.cols());
  VectorXd l = VectorXd::Zero(k);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  for (int outer = 0; outer < 3 * k + 10; ++outer) {
    const VectorXd w = A.transpose() * (b - A * l);
    int best = -1;
    double wmax = 1e-13;
    for (int j = 0; j < k; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < 3 * k + 10; ++inner) {
      std::vector<int> idx;
      for (int j = 0; j < k; ++j)
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      if (idx.empty()) break;
      MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
      const VectorXd zp = Ap.colPivHouseholderQr().solve(b);
      bool feasible = true;
      for (Eigen::Index c = 0; c < zp.size(); ++c) feasible = feasible && zp[c] > 0.0;
      if (feasible) {
        l.setZero();
        for (std::size_t c = 0; c < idx.size(); ++c) l[idx[c]] = zp[static_cast<Eigen::Index>(c)];
        break;
      }
      double alpha = 1.0;
      for (std::size_t c = 0; c < idx.size(); ++c) {
        const double zc = zp[static_cast<Eigen::Index>(c)];
        if (zc <= 0.0) alpha = std::min(alpha, l[idx[c]] / (l[idx[c]] - zc));
      }
      for (std::size_t c = 0; c < idx.size(); ++c) {
        const int j = idx[c];
        l[j] += alpha * (zp[static_cast<Eigen::Index>(c)] - l[j]);
        if (l[j] <= 1e-15) {
          l[j] = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  return l;
}

// Re-derives multipliers of the near-active rows from stationarity at x.
Multipliers polish_multipliers(const ConvexProgram& p, const std::vector<double>& x, double active_tol) {
  Multipliers m;
  size_multipliers(p, m);
  const auto rows = canonical_rows(p);
  std::vector<std::size_t> active;
  std::vector<ConstraintEval> evals;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ConstraintEval ev = evaluate(p, rows[k], x);
    double scale = 0.0;
    for (double gi : ev.grad) scale = std::max(scale, std::abs(gi));
    if (scale > 0.0 && ev.g >= -active_tol * std::max(1.0, scale)) {
      active.push_back(k);
      evals.push_back(std::move(ev));
    }
  }
  if (active.empty()) return m;
  const int n = p.dim();
  MatrixXd A(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c)
    for (int i = 0; i < n; ++i) A(i, static_cast<Eigen::Index>(c)) = evals[c].grad[static_cast<std::size_t>(i)];
  const std::vector<double> g0 = objective_gradient(p, x);
  VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = -g0[static_cast<std::size_t>(i)];
  const VectorXd l = nnls(A, b);
  for (std::size_t c = 0; c < active.size(); ++c) multiplier(m, rows[active[c]]) = l[static_cast<Eigen::Index>(c)];
  return m;
}

}  // namespace

double kkt_residual(const ConvexProgram& p, const Solution& cand) {
  Multipliers mu = cand.multipliers;
  size_multipliers(p, mu);
  std::vector<double> grad = objective_gradient(p, cand.x);
  // Dual terms are measured relative to the objective gradient so a large
  // slack weight does not inflate them; primal violation stays absolute.
  double scale = 1.0;
  for (double gi : grad) scale = std::max(scale, std::abs(gi));
  double res = 0.0;
  for (const RowRef& ref : canonical_rows(p)) {
    const ConstraintEval ev = evaluate(p, ref, cand.x);
    const double lambda = multiplier(mu, ref);
    res = std::max({res, positive(ev.g), positive(-lambda) / scale, std::abs(lambda * ev.g) / scale});
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lambda * ev.grad[i];
  }
  for (double gi : grad) res = std::max(res, std::abs(gi) / scale);
  return res;
}

Solution solve(const ConvexProgram& p, const SolverSettings& settings) {
  p.validate();
  Solution sol;
  sol.x.assign(static_cast<std::size_t>(p.dim()), 0.0);

  ConicLp lp;
  RowMap map;
  double const_violation = 0.0;
  if (!build_conic(p, lp, map, const_violation)) {
    sol.status = SolveStatus::kInfeasible;
    sol.certificate_residual = const_violation;
    return sol;
  }

  const ConicResult cr = solve_conic(lp, settings.tol, settings.max_iter);
  sol.iterations = cr.iterations;
  for (int i = 0; i < p.dim(); ++i) sol.x[static_cast<std::size_t>(i)] = cr.x[i];

  if (cr.status == ConicStatus::kPrimalInfeasible) {
    sol.status = SolveStatus::kInfeasible;
    sol.certificate_residual = cr.certificate;
    return sol;
  }

  Multipliers& mu = sol.multipliers;
  const VectorXd& z = cr.z;
  mu.linear.assign(p.linear.size(), 0.0);
  for (std::size_t k = 0; k < p.linear.size(); ++k)
    if (map.linear[k] >= 0) mu.linear[k] = z[map.linear[k]] / map.linear_scale[k];
  for (std::size_t k = 0; k < p.quadratic.size(); ++k) {
    const int r = map.quadratic[k];
    mu.quadratic.push_back((z[r] + z[r + 3]) / map.quadratic_scale[k]);
  }
  for (int b = 0; b < p.robots; ++b) mu.ball.push_back(z[map.ball[static_cast<std::size_t>(b)]]);
  for (int j = 0; j < p.flows; ++j) {
    mu.flow_lower.push_back(z[map.flow_lower[static_cast<std::size_t>(j)]]);
    mu.flow_upper.push_back(z[map.flow_upper[static_cast<std::size_t>(j)]]);
  }
  if (p.has_slack) mu.slack_lower = z[map.slack_lower];
  sol.kkt_residual = kkt_residual(p, sol);

  // Cone duals only pin the original multipliers to about sqrt(gap); refit
  // them on the near-active rows and keep whichever certificate is tighter.
  Solution polished = sol;
  polished.multipliers = polish_multipliers(p, sol.x, 1e-6);
  polished.kkt_residual = kkt_residual(p, polished);
  if (polished.kkt_residual < sol.kkt_residual) {
    sol.multipliers = std::move(polished.multipliers);
    sol.kkt_residual = polished.kkt_residual;
  }

  // The KKT residual in the original rows is the certificate; an IPM that
  // stalls just short of its own tolerance is still accepted on it.
  const double viol = primal_violation(p, sol.x);
  if (sol.kkt_residual <= settings.strict_kkt && viol <= settings.strict_kkt) {
    sol.status = SolveStatus::kOptimal;
  } else if (sol.kkt_residual <= settings.loose_kkt && viol <= settings.strict_kkt) {
    sol.status = SolveStatus::kOptimalLoose;
  } else {
    sol.status = SolveStatus::kMaxIter;
  }
  return sol;
}

}  // namespace wildfire
