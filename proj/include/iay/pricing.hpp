#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/errors.hpp"
#include "iay/oracle.hpp"
#include "iay/parallel.hpp"

namespace iay {

inline constexpr double kIdentityTol = 1e-10;

// Sampled payoff: G non-decreasing with G' >= 0 on a sorted y grid.
struct Payoff {
  std::vector<double> y;
  std::vector<double> G;
  std::vector<double> Gp;

  void validate(double tol = 1e-8) const {
    if (y.size() < 2 || G.size() != y.size() || Gp.size() != y.size())
      throw InputError("payoff needs matching y, G, G' arrays with at least two points");
    double acc = G.front();
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (Gp[k] < 0.0) throw InputError("payoff G' negative at y=" + std::to_string(y[k]));
      if (k > 0) {
        if (!(y[k] > y[k - 1])) throw InputError("payoff grid not strictly increasing");
        acc += 0.5 * (Gp[k] + Gp[k - 1]) * (y[k] - y[k - 1]);
        if (std::abs(acc - G[k]) > tol) {
          std::ostringstream os;
          os << "payoff G inconsistent with G' at y=" << y[k] << " (trapezoid " << acc
             << " vs G " << G[k] << ")";
          throw InputError(os.str());
        }
      }
    }
  }

  double gp_at(double x) const {
    if (x <= y.front()) return Gp.front();
    if (x >= y.back()) return Gp.back();
    auto it = std::upper_bound(y.begin(), y.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - y.begin()) - 1;
    const double t = (x - y[k]) / (y[k + 1] - y[k]);
    return Gp[k] + t * (Gp[k + 1] - Gp[k]);
  }
  double g_at(double x) const {
    if (x <= y.front()) return G.front();
    if (x >= y.back()) return G.back();
    auto it = std::upper_bound(y.begin(), y.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - y.begin()) - 1;
    const double t = (x - y[k]) / (y[k + 1] - y[k]);
    return G[k] + t * (G[k + 1] - G[k]);
  }
};

inline Payoff identity_payoff(double hi, std::size_t points) {
  Payoff p;
  p.y = uniform_grid(0.0, hi, points);
  p.G = p.y;
  p.Gp.assign(points, 1.0);
  return p;
}

inline Payoff constant_payoff(double c, double hi, std::size_t points = 2) {
  Payoff p;
  p.y = uniform_grid(0.0, hi, points);
  p.G.assign(points, c);
  p.Gp.assign(points, 0.0);
  return p;
}

// Logistic approximation of 1{y >= k} with width w.
inline Payoff smoothed_digital(double k, double w, double hi, std::size_t points) {
  Payoff p;
  p.y = uniform_grid(0.0, hi, points);
  for (double x : p.y) {
    const double s = 1.0 / (1.0 + std::exp(-(x - k) / w));
    p.G.push_back(s);
    p.Gp.push_back(s * (1.0 - s) / w);
  }
  // Re-integrate so G matches the trapezoid of G' exactly.
  for (std::size_t q = 1; q < points; ++q)
    p.G[q] = p.G[q - 1] + 0.5 * (p.Gp[q] + p.Gp[q - 1]) * (p.y[q] - p.y[q - 1]);
  return p;
}

// ---------------------------------------------------------------------------
// Barrier digital

// Ordered index chain a_1 < ... < a_m ending at the highest level whose
// boundary lies strictly below y.
inline std::vector<int> index_chain(const std::vector<LevelPoint>& pts, double y) {
  int top = static_cast<int>(pts.size());
  while (top > 0 && pts[top - 1].xi >= y) top = pts[top - 1].j;
  std::vector<int> chain;
  for (int a = top; a > 0; a = pts[a - 1].j) chain.push_back(a);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

inline double telescoping_sum(const MarginalSequence& seq, const std::vector<LevelPoint>& pts,
                              double y) {
  const auto chain = index_chain(pts, y);
  double s = 0.0;
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const int a = chain[l];
    const double xa = pts[a - 1].xi;
    s += seq[a - 1].call(xa) / (y - xa);
    if (l + 1 < chain.size()) {
      const double xb = pts[chain[l + 1] - 1].xi;
      s -= seq[a - 1].call(xb) / (y - xb);
    }
  }
  return s;
}

struct BarrierBound {
  double y = 0.0;
  double bound = 0.0;  // K_n(y)
  double sum = 0.0;    // telescoping representation
  double residual = 0.0;
};

inline BarrierBound barrier_digital_bound(const MarginalSequence& seq,
                                          const std::vector<LevelPoint>& pts, double y,
                                          double tol = kIdentityTol) {
  if (y < 0.0) throw InputError("barrier level must be >= 0");
  BarrierBound b;
  b.y = y;
  if (y == 0.0) {
    b.bound = b.sum = 1.0;
    return b;
  }
  b.bound = pts.back().K;
  b.sum = telescoping_sum(seq, pts, y);
  b.residual = std::abs(b.sum - b.bound);
  if (b.residual > tol) {
    std::ostringstream os;
    os.precision(17);
    os << "telescoping sum " << b.sum << " differs from K_n " << b.bound << " at y=" << y;
    throw IdentityMismatch(os.str());
  }
  return b;
}

inline BarrierBound barrier_digital_bound(const BoundarySet& bs, double y,
                                          double tol = kIdentityTol) {
  const std::size_t k = bs.find(y);
  const auto pts = k != static_cast<std::size_t>(-1)
                       ? bs.prior_at(k, bs.levels() + 1)
                       : levels_at(bs.seq, y, bs.opts, bs.levels());
  return barrier_digital_bound(bs.seq, pts, y, tol);
}

// ---------------------------------------------------------------------------
// Lookback

namespace detail {

inline double largest_r(const MarginalSequence& seq) {
  double r = 0.0;
  for (const Marginal& m : seq) r = std::max(r, m.r());
  return r;
}

}  // namespace detail

// G(0) + int_0^{r} K_n G' dy by the midpoint rule on the union of the
// boundary grid and the payoff grid. K_n can jump at grid points (atoms and
// barycentres), never strictly inside a cell, so midpoints avoid the jumps.
inline double lookback_bound(const BoundarySet& bs, const Payoff& pay) {
  const double r = detail::largest_r(bs.seq);
  if (pay.y.front() > 1e-12 || pay.y.back() < r - 1e-12) {
    std::ostringstream os;
    os << "payoff grid [" << pay.y.front() << ", " << pay.y.back()
       << "] does not cover [0, " << r << "]";
    throw GridCoverage(os.str());
  }
  const int n = bs.levels();
  std::vector<double> g;
  for (double v : bs.y)
    if (v <= r) g.push_back(v);
  for (double v : pay.y)
    if (v >= 0.0 && v <= r) g.push_back(v);
  g.push_back(0.0);
  g.push_back(r);
  std::sort(g.begin(), g.end());
  std::vector<double> grid;
  for (double v : g)
    if (grid.empty() || v - grid.back() > 1e-13 * std::max(1.0, v)) grid.push_back(v);

  const std::size_t N = grid.size();
  std::vector<double> term(N > 0 ? N - 1 : 0);
  parallel_for(term.size(), [&](std::size_t q) {
    const double m = 0.5 * (grid[q] + grid[q + 1]);
    term[q] = (grid[q + 1] - grid[q]) * levels_at(bs.seq, m, bs.opts, n).back().K * pay.gp_at(m);
  });
  double s = pay.g_at(0.0);
  for (double t : term) s += t;
  return s;
}

// ---------------------------------------------------------------------------
// Superhedge audit

struct SuperhedgeResult {
  double min_slack = std::numeric_limits<double>::infinity();
  std::size_t worst_path = 0;
  double mean_hedge = 0.0;      // E[portfolio value]
  double bound = 0.0;           // G(0) + sum h G' K_n over the same nodes
  double mean_payoff = 0.0;     // E[G(M̄_n)] by the same quadrature
  std::size_t undecided = 0;    // records whose max could not resolve a node
  std::vector<double> nodes;    // quadrature nodes (cell midpoints)
};

// Quadrature nodes: midpoints of the payoff cells inside [0, r]. Exact
// ensembles must resolve these points (pass them as oracle query points).
inline std::vector<double> superhedge_nodes(const MarginalSequence& seq, const Payoff& pay) {
  const double r = detail::largest_r(seq);
  std::vector<double> out;
  for (std::size_t q = 0; q + 1 < pay.y.size(); ++q) {
    const double m = 0.5 * (pay.y[q] + pay.y[q + 1]);
    if (m > 0.0 && m < r) out.push_back(m);
  }
  return out;
}

namespace detail {

// Trajectorial portfolio for the digital 1{M̄_n >= y} on one path: static
// calls along the ordered index chain, a forward started when y is first
// reached, and forwards rolled at the intermediate stops. Returns false when
// some record cannot tell whether its max reached y.
inline bool node_portfolio(const PathRecord& rec, const std::vector<LevelPoint>& pts, double y,
                           double& port, int& top) {
  const int n = static_cast<int>(pts.size());
  auto ge = [&](int level) -> int {
    if (level == 0) return 0;
    const LevelRecord& r = rec.levels[level - 1];
    if (r.point()) return r.max_lo >= y ? 1 : 0;
    auto v = max_at_least(r, y);
    if (!v || (*v > 0.0 && *v < 1.0)) return -1;
    return *v >= 1.0 ? 1 : 0;
  };
  top = ge(n);
  if (top < 0) return false;
  const auto chain = index_chain(pts, y);
  port = 0.0;
  int prev = 0;
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const int a = chain[l];
    const double xa = pts[a - 1].xi;
    const double Ma = rec.levels[a - 1].m;
    const int ga = ge(a), gp = ge(prev);
    if (ga < 0 || gp < 0) return false;
    port += std::max(Ma - xa, 0.0) / (y - xa);
    if (gp == 0 && ga == 1) port += (y - Ma) / (y - xa);
    if (l + 1 < chain.size()) {
      const int b = chain[l + 1];
      const double xb = pts[b - 1].xi;
      port -= std::max(Ma - xb, 0.0) / (y - xb);
      if (ga == 1 && Ma >= xb) port += (rec.levels[b - 1].m - Ma) / (y - xb);
    }
    prev = a;
  }
  return true;
}

struct NodeSetup {
  std::vector<double> nodes;
  std::vector<double> hw;  // cell width times G' at the node
  std::vector<std::vector<LevelPoint>> pts;
};

inline NodeSetup node_setup(const BoundarySet& bs, const Payoff& pay) {
  NodeSetup ns;
  ns.nodes = superhedge_nodes(bs.seq, pay);
  const std::size_t Q = ns.nodes.size();
  ns.hw.assign(Q, 0.0);
  ns.pts.resize(Q);
  parallel_for(Q, [&](std::size_t q) {
    ns.pts[q] = levels_at(bs.seq, ns.nodes[q], bs.opts, bs.levels());
  });
  std::size_t q = 0;
  for (std::size_t c = 0; c + 1 < pay.y.size() && q < Q; ++c) {
    const double m = 0.5 * (pay.y[c] + pay.y[c + 1]);
    if (m == ns.nodes[q]) {
      ns.hw[q] = (pay.y[c + 1] - pay.y[c]) * pay.gp_at(m);
      ++q;
    }
  }
  return ns;
}

}  // namespace detail

// Per path: G(0) + sum_k h_k G'(y_k) P_k(path), against the same quadrature
// of the payoff, G(0) + sum_k h_k G'(y_k) 1{M̄_n >= y_k}. Needs records whose
// maxima resolve every node (Monte Carlo ensembles do).
inline SuperhedgeResult superhedge_check(const PathEnsemble& e, const BoundarySet& bs,
                                         const Payoff& pay) {
  SuperhedgeResult out;
  const auto ns = detail::node_setup(bs, pay);
  out.nodes = ns.nodes;
  const std::size_t Q = ns.nodes.size();
  const double g0 = pay.g_at(0.0);
  out.bound = g0;
  for (std::size_t q = 0; q < Q; ++q) out.bound += ns.hw[q] * ns.pts[q].back().K;

  const std::size_t P = e.paths.size();
  std::vector<double> hedge(P, g0), payoff(P, g0);
  std::vector<std::size_t> und(P, 0);
  parallel_for(P, [&](std::size_t p) {
    for (std::size_t q = 0; q < Q; ++q) {
      if (ns.hw[q] == 0.0) continue;
      double port = 0.0;
      int top = 0;
      if (!detail::node_portfolio(e.paths[p], ns.pts[q], ns.nodes[q], port, top)) {
        ++und[p];
        continue;
      }
      hedge[p] += ns.hw[q] * port;
      payoff[p] += ns.hw[q] * top;
    }
  });
  for (std::size_t p = 0; p < P; ++p) {
    const double w = e.paths[p].weight;
    out.mean_hedge += w * hedge[p];
    out.mean_payoff += w * payoff[p];
    out.undecided += und[p];
    const double slack = hedge[p] - payoff[p];
    if (slack < out.min_slack) {
      out.min_slack = slack;
      out.worst_path = p;
    }
  }
  if (P == 0) out.min_slack = 0.0;
  return out;
}

// Exact audit: the chain is rerun per node with the node as a threshold, so
// every record resolves it. The reported min slack is the sum over nodes of
// the per-node minimum, a lower bound for the minimum over paths.
inline SuperhedgeResult superhedge_check_exact(const ExitProgram& prog, const BoundarySet& bs,
                                               const Payoff& pay) {
  SuperhedgeResult out;
  const auto ns = detail::node_setup(bs, pay);
  out.nodes = ns.nodes;
  const std::size_t Q = ns.nodes.size();
  const double g0 = pay.g_at(0.0);
  std::vector<double> mins(Q, 0.0), eport(Q, 0.0), epay(Q, 0.0);
  std::vector<std::size_t> und(Q, 0);
  parallel_for(Q, [&](std::size_t q) {
    if (ns.hw[q] == 0.0) return;
    const PathEnsemble e = exact_laws_program(prog, 0.0, {ns.nodes[q]});
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& p : e.paths) {
      double port = 0.0;
      int top = 0;
      if (!detail::node_portfolio(p, ns.pts[q], ns.nodes[q], port, top)) {
        ++und[q];
        continue;
      }
      mn = std::min(mn, port - top);
      eport[q] += p.weight * port;
      epay[q] += p.weight * top;
    }
    mins[q] = std::isfinite(mn) ? mn : 0.0;
  });
  out.min_slack = 0.0;
  out.bound = out.mean_hedge = out.mean_payoff = g0;
  for (std::size_t q = 0; q < Q; ++q) {
    out.min_slack += ns.hw[q] * mins[q];
    out.bound += ns.hw[q] * ns.pts[q].back().K;
    out.mean_hedge += ns.hw[q] * eport[q];
    out.mean_payoff += ns.hw[q] * epay[q];
    out.undecided += und[q];
  }
  return out;
}

// Digital barrier bounds over a y grid, optionally asserting the identity.
inline std::vector<BarrierBound> barrier_table(const BoundarySet& bs,
                                               const std::vector<double>& ys,
                                               double tol = kIdentityTol) {
  std::vector<BarrierBound> out(ys.size());
  parallel_for(ys.size(), [&](std::size_t q) { out[q] = barrier_digital_bound(bs, ys[q], tol); });
  return out;
}

}  // namespace iay
