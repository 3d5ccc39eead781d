#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "iay/errors.hpp"
#include "iay/measures.hpp"
#include "iay/parallel.hpp"

namespace iay {

struct SearchOptions {
  int refine_points = 2001;   // uniform safety-net points in [l, y)
  double tie_rel = 1e-10;     // relative band for "sup argmin"
  double endpoint_tol = 1e-9; // c_n(y) == c_i(y) test at zeta = y
};

// Value of one level at a fixed y: boundary, maximum law, binding index.
struct LevelPoint {
  double xi;
  double K;
  int j;
};

// How the objective is closed at zeta = y when c_n(y) == c_i(y).
//   Convention: K_i(y) for y > 0 and the left-limit slope formula at y = 0.
//   LeftLimit:  the one-sided limit -c_n'(y-) + c_i'(y-) + K_i(y) everywhere.
// Boundaries use Convention; the uniqueness diagnostics use LeftLimit.
enum class Endpoint { Convention, LeftLimit };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// max{k : xi_k(y) < zeta}, with xi_0 = -inf.
inline int index_imath(const std::vector<double>& prior_xi, double zeta) {
  int idx = 0;
  for (std::size_t k = 0; k < prior_xi.size(); ++k)
    if (prior_xi[k] < zeta) idx = static_cast<int>(k) + 1;
  return idx;
}

inline int index_imath(const std::vector<LevelPoint>& prior, double zeta) {
  int idx = 0;
  for (std::size_t k = 0; k < prior.size(); ++k)
    if (prior[k].xi < zeta) idx = static_cast<int>(k) + 1;
  return idx;
}

// Same, with a non-strict comparison: the branch just to the right of zeta.
inline int index_imath_right(const std::vector<LevelPoint>& prior, double zeta) {
  int idx = 0;
  for (std::size_t k = 0; k < prior.size(); ++k)
    if (prior[k].xi <= zeta) idx = static_cast<int>(k) + 1;
  return idx;
}

namespace detail {

inline double call_of(const MarginalSequence& seq, int level, double z) {
  return level == 0 ? 0.0 : seq[level - 1].call(z);
}
inline double slope_left(const MarginalSequence& seq, int level, double z) {
  return level == 0 ? 0.0 : seq[level - 1].call_slope_left(z);
}
inline double slope_right(const MarginalSequence& seq, int level, double z) {
  return level == 0 ? 0.0 : seq[level - 1].call_slope_right(z);
}
inline double K_of(const std::vector<LevelPoint>& prior, int level) {
  return level == 0 ? 0.0 : prior[level - 1].K;
}

}  // namespace detail

// The level-n objective c^n(zeta, y) / (y - zeta); levels are 1-based and
// prior holds levels 1..n-1 evaluated at the same y.
inline double objective_cn(const MarginalSequence& seq, int n,
                           const std::vector<LevelPoint>& prior, double zeta, double y,
                           const SearchOptions& opt = {},
                           Endpoint ep = Endpoint::Convention) {
  if (zeta < y) {
    const int i = index_imath(prior, zeta);
    const double diff = seq[n - 1].call(zeta) - detail::call_of(seq, i, zeta);
    return diff / (y - zeta) + detail::K_of(prior, i);
  }
  const int i = index_imath(prior, y);
  const double gap = seq[n - 1].call(y) - detail::call_of(seq, i, y);
  if (std::abs(gap) > opt.endpoint_tol) return kInf;
  if (ep == Endpoint::LeftLimit || y <= 0.0)
    return -seq[n - 1].call_slope_left(y) + detail::slope_left(seq, i, y) +
           detail::K_of(prior, i);
  return detail::K_of(prior, i);
}

struct Candidate {
  double z;
  double v;
};

// Picks the largest zeta whose value lies within the relative band of the
// minimum. Returns index into cands.
inline std::size_t sup_argmin(const std::vector<Candidate>& cands, double tie_rel) {
  double best = kInf;
  for (const Candidate& c : cands) best = std::min(best, c.v);
  const double band = tie_rel * std::abs(best) + 1e-15;
  std::size_t arg = cands.size();
  for (std::size_t q = 0; q < cands.size(); ++q) {
    if (cands[q].v <= best + band && (arg == cands.size() || cands[q].z > cands[arg].z))
      arg = q;
  }
  return arg;
}

// Kink candidates for level n at y: atoms of mu_1..mu_n and earlier
// boundaries inside [l_{mu_n}, y). On each gap between consecutive kinks the
// objective is a ratio of two affine functions, hence monotone, so its
// infimum over [l, y) sits on this set or at the endpoint.
inline std::vector<double> kink_candidates(const MarginalSequence& seq, int n,
                                           const std::vector<LevelPoint>& prior, double y) {
  const double lo = seq[n - 1].l();
  std::vector<double> zs;
  for (int k = 0; k < n; ++k)
    for (const Atom& a : seq[k].atoms())
      if (a.x >= lo && a.x < y) zs.push_back(a.x);
  for (const LevelPoint& p : prior)
    if (p.xi >= lo && p.xi < y) zs.push_back(p.xi);
  if (lo < y) zs.push_back(lo);
  std::sort(zs.begin(), zs.end());
  zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
  return zs;
}

inline LevelPoint compute_boundary_level(const MarginalSequence& seq, int n,
                                         const std::vector<LevelPoint>& prior, double y,
                                         const SearchOptions& opt = {}) {
  std::vector<Candidate> cands;
  for (double z : kink_candidates(seq, n, prior, y))
    cands.push_back({z, objective_cn(seq, n, prior, z, y, opt)});
  cands.push_back({y, objective_cn(seq, n, prior, y, y, opt)});

  double best = kInf;
  for (const Candidate& c : cands) best = std::min(best, c.v);

  // Safety net: a refinement point only wins if it beats every kink by more
  // than the tie band, so atomic inputs stay snapped to their atoms.
  const double lo = seq[n - 1].l();
  if (opt.refine_points > 1 && lo < y) {
    const double band = opt.tie_rel * std::abs(best) + 1e-15;
    std::vector<Candidate> extra;
    for (int q = 0; q < opt.refine_points; ++q) {
      const double z = lo + (y - lo) * static_cast<double>(q) / opt.refine_points;
      const double v = objective_cn(seq, n, prior, z, y, opt);
      if (v < best - band) extra.push_back({z, v});
    }
    cands.insert(cands.end(), extra.begin(), extra.end());
  }

  const std::size_t arg = sup_argmin(cands, opt.tie_rel);
  if (arg == cands.size() || !std::isfinite(cands[arg].v)) {
    std::ostringstream os;
    os << "no finite minimizer at level " << n << ", y = " << y;
    throw NoMinimizer(n, y, os.str());
  }
  LevelPoint out;
  out.xi = cands[arg].z;
  out.K = cands[arg].v;
  out.j = index_imath(prior, out.xi >= y ? y : out.xi);
  return out;
}

// All levels 1..levels at a single y, each computed from the ones below it.
inline std::vector<LevelPoint> levels_at(const MarginalSequence& seq, double y,
                                         const SearchOptions& opt = {}, int levels = -1) {
  if (levels < 0) levels = static_cast<int>(seq.size());
  std::vector<LevelPoint> out;
  out.reserve(levels);
  for (int n = 1; n <= levels; ++n) out.push_back(compute_boundary_level(seq, n, out, y, opt));
  return out;
}

struct JumpOptions {
  double slope_cap = 20.0;  // |d xi| above slope_cap * dy counts as a jump
  double abs_min = 1e-9;
};

struct BoundarySet {
  MarginalSequence seq;
  SearchOptions opts;
  std::vector<double> y;
  std::vector<std::vector<double>> xi;  // [level-1][k]
  std::vector<std::vector<double>> K;
  std::vector<std::vector<int>> j;
  std::vector<std::vector<double>> jumps;  // per level, grid y right after a jump

  int levels() const { return static_cast<int>(xi.size()); }
  std::size_t size() const { return y.size(); }

  std::vector<LevelPoint> prior_at(std::size_t k, int level) const {
    std::vector<LevelPoint> p;
    for (int i = 1; i < level; ++i) p.push_back({xi[i - 1][k], K[i - 1][k], j[i - 1][k]});
    return p;
  }

  // Index of an exact grid match, or npos.
  std::size_t find(double yy) const {
    auto it = std::lower_bound(y.begin(), y.end(), yy);
    if (it != y.end() && *it == yy) return static_cast<std::size_t>(it - y.begin());
    return static_cast<std::size_t>(-1);
  }

  LevelPoint at(int level, double yy) const {
    const std::size_t k = find(yy);
    if (k != static_cast<std::size_t>(-1))
      return {xi[level - 1][k], K[level - 1][k], j[level - 1][k]};
    return levels_at(seq, yy, opts, level).back();
  }

  bool is_jump(int level, double yy) const {
    for (double t : jumps[level - 1])
      if (t == yy) return true;
    return false;
  }

  // Jump at yy in this level or any level below it (K inherits lower jumps).
  bool near_jump(int level, double yy) const {
    for (int i = 1; i <= level; ++i)
      if (is_jump(i, yy)) return true;
    return false;
  }

  // Left limit K_level(yy-), by two-point extrapolation from the left.
  double K_left(int level, double yy) const {
    if (yy <= 0.0) return levels_at(seq, 0.0, opts, level).back().K;
    const double eps = 1e-7 * std::max(1.0, std::abs(yy));
    const double a = levels_at(seq, yy - eps, opts, level).back().K;
    const double b = levels_at(seq, yy - 2.0 * eps, opts, level).back().K;
    return 2.0 * a - b;
  }
};

inline void detect_jumps(BoundarySet& b, const JumpOptions& jo = {}) {
  b.jumps.assign(b.levels(), {});
  for (int i = 0; i < b.levels(); ++i) {
    for (std::size_t k = 1; k < b.size(); ++k) {
      const double dy = b.y[k] - b.y[k - 1];
      const double dx = std::abs(b.xi[i][k] - b.xi[i][k - 1]);
      if (dx > std::max(jo.abs_min, jo.slope_cap * dy)) b.jumps[i].push_back(b.y[k]);
    }
  }
}

inline BoundarySet compute_boundaries(const MarginalSequence& seq, std::vector<double> grid,
                                      const SearchOptions& opt = {},
                                      const JumpOptions& jo = {}, int levels = -1) {
  if (levels < 0) levels = static_cast<int>(seq.size());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty() || grid.front() < 0.0) throw InputError("y grid must be non-empty and >= 0");
  BoundarySet b;
  b.seq = MarginalSequence(seq.begin(), seq.begin() + levels);
  b.opts = opt;
  b.y = std::move(grid);
  const std::size_t N = b.y.size();
  b.xi.assign(levels, std::vector<double>(N));
  b.K.assign(levels, std::vector<double>(N));
  b.j.assign(levels, std::vector<int>(N));
  parallel_for(N, [&](std::size_t k) {
    const auto pts = levels_at(b.seq, b.y[k], opt, levels);
    for (int i = 0; i < levels; ++i) {
      b.xi[i][k] = pts[i].xi;
      b.K[i][k] = pts[i].K;
      b.j[i][k] = pts[i].j;
    }
  });
  detect_jumps(b, jo);
  return b;
}

// Grid: 0, non-negative atoms and the barycentres at every atom (the
// breakpoints of every b^{-1}; atomic inputs only), plus a uniform fill of the
// given step, up to one step past the largest right endpoint.
inline std::vector<double> build_y_grid(const MarginalSequence& seq, double step,
                                        const std::vector<double>& extra = {}) {
  double rmax = 0.0;
  for (const Marginal& m : seq) rmax = std::max(rmax, m.r());
  const double top = rmax + step;
  std::vector<double> special = {0.0};
  for (const Marginal& m : seq) {
    // A call curve's implied atoms are a discretisation, not features.
    if (m.is_curve()) continue;
    for (const Atom& a : m.atoms()) {
      if (a.x >= 0.0) special.push_back(a.x);
      const double b = barycentre(m, a.x);
      if (b >= 0.0 && b <= top) special.push_back(b);
    }
  }
  for (double e : extra)
    if (e >= 0.0) special.push_back(e);
  std::sort(special.begin(), special.end());
  special.erase(std::unique(special.begin(), special.end()), special.end());

  std::vector<double> out = special;
  const long steps = static_cast<long>(std::ceil(top / step));
  for (long q = 0; q <= steps; ++q) {
    const double v = static_cast<double>(q) * step;
    auto it = std::lower_bound(special.begin(), special.end(), v);
    const double tol = 1e-9 * std::max(1.0, v);
    bool clash = false;
    if (it != special.end() && std::abs(*it - v) <= tol) clash = true;
    if (it != special.begin() && std::abs(*(it - 1) - v) <= tol) clash = true;
    if (!clash) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t q = 0; q < points; ++q)
    g[q] = lo + (hi - lo) * static_cast<double>(q) / static_cast<double>(points - 1);
  return g;
}

// Pool-adjacent-violators on each xi row. Only used on explicit request: a
// decreasing boundary signals a failing restriction, not noise.
inline void isotonic_fix(BoundarySet& b, std::ostream& warn = std::cerr) {
  for (int i = 0; i < b.levels(); ++i) {
    std::vector<double>& v = b.xi[i];
    std::vector<double> val;
    std::vector<std::size_t> len;
    bool changed = false;
    for (double x : v) {
      val.push_back(x);
      len.push_back(1);
      while (val.size() > 1 && val[val.size() - 2] > val.back()) {
        const std::size_t a = len[len.size() - 2], c = len.back();
        const double m = (val[val.size() - 2] * a + val.back() * c) / static_cast<double>(a + c);
        val.pop_back();
        len.pop_back();
        val.back() = m;
        len.back() = a + c;
        changed = true;
      }
    }
    if (changed) {
      warn << "WARNING: xi_" << (i + 1)
           << " was not monotone and has been isotonized; this points at a failing"
              " restriction on the marginals, not at numerical noise\n";
      std::size_t k = 0;
      for (std::size_t q = 0; q < val.size(); ++q)
        for (std::size_t r = 0; r < len[q]; ++r) v[k++] = val[q];
    }
  }
}

// ---------------------------------------------------------------------------
// Uniqueness / ordering diagnostics

struct DiagnosticFlag {
  int level;
  double y;
  char reason;  // 'a' near-tie, 'b' calls not strictly ordered, 'c' n=2 test
  std::string detail;
};

struct DiagnosticsReport {
  std::vector<DiagnosticFlag> flags;
  bool pass() const { return flags.empty(); }
  bool has(int level, double y, char reason) const {
    for (const auto& f : flags)
      if (f.level == level && f.y == y && f.reason == reason) return true;
    return false;
  }
};

inline DiagnosticsReport assumption_diagnostics(const BoundarySet& b, double tol = 1e-9,
                                                int beta_samples = 32) {
  DiagnosticsReport rep;
  const auto& seq = b.seq;
  const std::size_t N = b.size();
  // Spread of the near-minimizers at (i, y); flags (a) beyond `cell`, and (b).
  auto inspect = [&](int i, double y, const std::vector<LevelPoint>& prior, double cell,
                     bool check_order) {
    const Marginal& mu = seq[i - 1];
    std::vector<Candidate> cands;
    for (double z : kink_candidates(seq, i, prior, y))
      cands.push_back({z, objective_cn(seq, i, prior, z, y, b.opts, Endpoint::LeftLimit)});
    cands.push_back({y, objective_cn(seq, i, prior, y, y, b.opts, Endpoint::LeftLimit)});
    double best = kInf;
    for (const auto& c : cands) best = std::min(best, c.v);
    double zmin = kInf, zmax = -kInf;
    for (const auto& c : cands) {
      if (c.v <= best + tol) {
        zmin = std::min(zmin, c.z);
        zmax = std::max(zmax, c.z);
      }
    }
    if (zmax - zmin > std::max(cell, 1e-9)) {
      std::ostringstream os;
      os.precision(17);
      os << "minimizers " << zmin << " and " << zmax << " tie at value " << best;
      rep.flags.push_back({i, y, 'a', os.str()});
    }
    if (check_order && zmax < y) {
      const int ii = index_imath(prior, y);
      const double ci = detail::call_of(seq, ii, y);
      if (mu.call(y) <= ci + tol) {
        std::ostringstream os;
        os.precision(17);
        os << "minimizer " << zmax << " < y but c_" << i << "(y) = " << mu.call(y)
           << " does not exceed c_" << ii << "(y) = " << ci;
        rep.flags.push_back({i, y, 'b', os.str()});
      }
    }
  };
  for (int i = 2; i <= b.levels(); ++i) {
    const Marginal& mu = seq[i - 1];
    // Calls that touch inside the support split the pair into pieces no
    // single boundary can connect.
    {
      const double pad = 1e-9 * std::max(1.0, mu.r() - mu.l());
      std::vector<double> zs;
      for (int k = i - 2; k < i; ++k)
        for (const Atom& a : seq[k].atoms())
          if (a.x > mu.l() + pad && a.x < mu.r() - pad) zs.push_back(a.x);
      std::sort(zs.begin(), zs.end());
      zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
      for (double z : zs) {
        const double gap = mu.call(z) - seq[i - 2].call(z);
        if (gap <= tol) {
          std::ostringstream os;
          os.precision(17);
          os << "c_" << i << " and c_" << i - 1 << " touch at " << z
             << " inside the support (gap " << gap << ")";
          rep.flags.push_back({i, z, 'b', os.str()});
          break;
        }
      }
    }
    for (std::size_t k = 0; k < N; ++k) {
      const double y = b.y[k];
      if (!(y > 0.0 && y < mu.r())) continue;
      double cell = 0.0;
      if (k > 0) cell = std::max(cell, y - b.y[k - 1]);
      if (k + 1 < N) cell = std::max(cell, b.y[k + 1] - y);
      inspect(i, y, b.prior_at(k, i), cell, true);
    }
    // Jumps usually fall between grid points; locate each one and look for
    // the two competing minimizers there.
    for (double t : b.jumps[i - 1]) {
      const std::size_t k = b.find(t);
      if (k == 0 || k == static_cast<std::size_t>(-1)) continue;
      double lo = b.y[k - 1], hi = t;
      if (!(hi > 0.0 && lo < mu.r())) continue;
      const double x_lo = b.xi[i - 1][k - 1];
      for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double xm = levels_at(seq, mid, b.opts, i).back().xi;
        if (std::abs(xm - x_lo) <= 1e-12 * std::max(1.0, std::abs(x_lo)))
          lo = mid;
        else
          hi = mid;
      }
      // A jump onto the diagonal at r itself is allowed; the solver only
      // resolves it up to its own tolerance.
      if (!(hi > 0.0 && hi < mu.r() - 1e-6 * std::max(1.0, std::abs(mu.r())))) continue;
      const std::size_t before = rep.flags.size();
      if (hi != t) {
        const auto pts = levels_at(seq, hi, b.opts, i);
        inspect(i, hi, std::vector<LevelPoint>(pts.begin(), pts.end() - 1), 0.0, false);
      }
      // A jump right at the origin has no interior tie, but the boundary is
      // still discontinuous where the path starts.
      if (rep.flags.size() == before && hi - b.y[k - 1] <= 1e-9) {
        std::ostringstream os;
        os.precision(17);
        os << "xi_" << i << " jumps from " << x_lo << " at y = " << b.y[k - 1]
           << " to " << b.xi[i - 1][k] << " immediately after";
        rep.flags.push_back({i, b.y[k - 1], 'a', os.str()});
      }
    }
  }
  // n = 2 characterization, for curve inputs.
  if (seq.size() == 2 && b.levels() == 2 && (seq[0].is_curve() || seq[1].is_curve())) {
    for (std::size_t k = 0; k < N; ++k) {
      const double y = b.y[k];
      if (!(y > 0.0 && y < seq[1].r())) continue;
      const double b1 = barycentre_inverse(seq[0], y);
      const double b2 = barycentre_inverse(seq[1], y);
      if (!(b2 < b1) || !(b1 < y)) continue;
      const double lhs = hl_tail(seq[1], y) - hl_tail(seq[0], y);
      for (int q = 0; q < beta_samples; ++q) {
        const double beta = b1 + (y - b1) * static_cast<double>(q) / beta_samples;
        const double rhs = (seq[1].call(beta) - seq[0].call(beta)) / (y - beta);
        if (lhs > rhs - tol) {
          std::ostringstream os;
          os.precision(17);
          os << "HL difference " << lhs << " not below " << rhs << " at beta " << beta;
          rep.flags.push_back({2, y, 'c', os.str()});
          break;
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// ODE and first-order residuals

struct ResidualPoint {
  int level;
  double y;
  double value;
};

struct OdeReport {
  std::vector<ResidualPoint> ode;  // only unmasked points
  std::vector<ResidualPoint> foc;  // only strictly increasing points
  double max_ode(int level = 0) const {
    double m = 0.0;
    for (const auto& p : ode)
      if (level == 0 || p.level == level) m = std::max(m, p.value);
    return m;
  }
  double max_foc() const {
    double m = 0.0;
    for (const auto& p : foc) m = std::max(m, p.value);
    return m;
  }
};

inline OdeReport ode_residual(const BoundarySet& b, double increase_tol = 1e-8) {
  OdeReport rep;
  const std::size_t N = b.size();
  for (int i = 1; i <= b.levels(); ++i) {
    const auto& X = b.xi[i - 1];
    const auto& K = b.K[i - 1];
    const auto& J = b.j[i - 1];
    for (std::size_t k = 1; k + 1 < N; ++k) {
      const double y = b.y[k];
      bool ok = true;
      for (std::size_t q = k - 1; q <= k + 1; ++q)
        if (!(X[q] < b.y[q] - 1e-12) || J[q] != J[k]) ok = false;
      if (!ok) continue;
      const int jj = J[k];
      auto jumped = [&](int lev) {
        return lev > 0 && (b.is_jump(lev, b.y[k]) || b.is_jump(lev, b.y[k + 1]));
      };
      if (jumped(i) || jumped(jj)) continue;
      const double h = b.y[k + 1] - b.y[k - 1];
      const double dK = (K[k + 1] - K[k - 1]) / h;
      double dKj = 0.0, Kj = 0.0;
      if (jj > 0) {
        dKj = (b.K[jj - 1][k + 1] - b.K[jj - 1][k - 1]) / h;
        Kj = b.K[jj - 1][k];
      }
      const double gap = y - X[k];
      rep.ode.push_back({i, y, std::abs(dK + K[k] / gap - dKj - Kj / gap)});

      if (X[k + 1] - X[k - 1] > increase_tol * h) {
        const auto prior = b.prior_at(k, i);
        const int il = index_imath(prior, X[k]);
        const int ir = index_imath_right(prior, X[k]);
        // Atoms a few ulps either side of xi (curves of different levels
        // discretised on different strike lists) count as sitting at xi.
        const double eps = 1e-9 * std::max(1.0, std::abs(X[k]));
        const double L = K[k] + b.seq[i - 1].call_slope_left(X[k] - eps) -
                         detail::slope_left(b.seq, il, X[k] - eps) - detail::K_of(prior, il);
        const double R = K[k] + b.seq[i - 1].call_slope_right(X[k] + eps) -
                         detail::slope_right(b.seq, ir, X[k] + eps) - detail::K_of(prior, ir);
        rep.foc.push_back({i, y, std::max({0.0, L, -R})});
      }
    }
  }
  return rep;
}

}  // namespace iay
