#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/errors.hpp"
#include "iay/measures.hpp"
#include "iay/oracle.hpp"
#include "iay/parallel.hpp"
#include "iay/verify.hpp"

namespace iay {

// ---------------------------------------------------------------------------
// The three-marginal counterexample

inline MarginalSequence counterexample_measures() {
  return {
      Marginal::from_atoms({{-1.0, 2.0 / 3.0}, {2.0, 1.0 / 3.0}}),
      Marginal::from_atoms({{-3.0, 2.0 / 7.0}, {0.5, 18.0 / 35.0}, {3.0, 1.0 / 5.0}}),
      Marginal::from_atoms({{-3.0, 2.0 / 7.0}, {-2.0, 9.0 / 35.0}, {3.0, 16.0 / 35.0}}),
  };
}

// The only embedding of the triple: exit (-1, 2); then (-3, 1/2) from -1 and
// (1/2, 3) from 2; then (-2, 3).
inline ExitProgram counterexample_program() {
  ExitProgram p;
  p.stages.push_back(Stage{{IntervalRule{-1.0, 2.0}}});
  p.stages.push_back(Stage{{IntervalRule{-3.0, 0.5}, IntervalRule{0.5, 3.0}}});
  p.stages.push_back(Stage{{IntervalRule{-2.0, 3.0}}});
  return p;
}

struct CounterexampleReport {
  std::vector<double> naive_xi3_window;  // [lo, hi] where naive xi_3 = -3 above 1/2
  double naive_xi3_value = 0.0;
  std::vector<StepBoundary> naive_steps;
  double naive_m3_mass_at_minus3 = 0.0;
  double mu3_mass_at_minus3 = 2.0 / 7.0;
  double naive_m2_mass_at_minus1 = 0.0;
  double naive_level2_tv = 0.0;
  double program_level3_tv = 0.0;
  double program_level2_tv = 0.0;
  CheckReport checks;
};

inline CounterexampleReport counterexample_suite(const SearchOptions& opt = {}) {
  const MarginalSequence seq = counterexample_measures();
  CounterexampleReport rep;

  // (a) naive xi_3 on a window just above 1/2
  rep.naive_steps = level_steps(seq, opt);
  const StepBoundary& s3 = rep.naive_steps[2];
  bool found = false;
  for (std::size_t q = 0; q + 1 < s3.pieces.size(); ++q) {
    const StepPiece& p = s3.pieces[q];
    const double hi = s3.pieces[q + 1].t;
    if (!p.diagonal && hi > 0.5 && p.t >= 0.5 - 1e-12 && std::abs(p.v + 3.0) <= 1e-12) {
      rep.naive_xi3_window = {p.t, hi};
      rep.naive_xi3_value = p.v;
      found = true;
      break;
    }
  }
  {
    Check c;
    c.name = "naive_xi3_window";
    c.statistic = found ? rep.naive_xi3_window[1] - rep.naive_xi3_window[0] : 0.0;
    c.threshold = 0.0;
    c.pass = found && c.statistic > 0.0;
    std::ostringstream os;
    os.precision(17);
    if (found)
      os << "xi_3 = " << rep.naive_xi3_value << " on [" << rep.naive_xi3_window[0] << ", "
         << rep.naive_xi3_window[1] << ")";
    else
      os << "no piece of xi_3 equal to -3 above 1/2";
    c.note = os.str();
    rep.checks.checks.push_back(c);
  }

  // (b) naive laws
  const auto naive = exact_level_laws_program(program_from_steps(rep.naive_steps));
  rep.naive_m3_mass_at_minus3 = naive[2].mass_near(-3.0);
  rep.naive_m2_mass_at_minus1 = naive[1].mass_near(-1.0);
  rep.naive_level2_tv = compare_law(naive[1], seq[1]).tv.value_or(1.0);
  {
    Check c;
    c.name = "naive_m3_excess_at_minus3";
    c.statistic = rep.naive_m3_mass_at_minus3 - rep.mu3_mass_at_minus3;
    c.threshold = 1e-6;
    c.pass = c.statistic > c.threshold;
    std::ostringstream os;
    os.precision(17);
    os << "P[M_3 = -3] = " << rep.naive_m3_mass_at_minus3 << " against mu_3 mass "
       << rep.mu3_mass_at_minus3;
    c.note = os.str();
    rep.checks.checks.push_back(c);
  }
  {
    Check c;
    c.name = "naive_m2_mass_at_minus1";
    c.statistic = std::abs(rep.naive_m2_mass_at_minus1 - 1.0 / 3.0);
    c.threshold = 1e-12;
    c.pass = c.statistic <= c.threshold;
    std::ostringstream os;
    os.precision(17);
    os << "P[M_2 = -1] = " << rep.naive_m2_mass_at_minus1;
    c.note = os.str();
    rep.checks.checks.push_back(c);
  }

  // (c) the explicit program
  const auto prog = exact_level_laws_program(counterexample_program());
  rep.program_level2_tv = compare_law(prog[1], seq[1]).tv.value_or(1.0);
  rep.program_level3_tv = compare_law(prog[2], seq[2]).tv.value_or(1.0);
  {
    Check c;
    c.name = "program_law_m3";
    c.statistic = std::max(rep.program_level3_tv, rep.program_level2_tv);
    c.threshold = 1e-12;
    c.pass = c.statistic <= c.threshold;
    c.note = "total variation of M_2 and M_3 under the explicit program";
    rep.checks.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Joint law of (running max after stage 1, value after the modified stage 2)

struct JointItem {
  LevelRecord max1;  // only the max part is used
  double m2 = 0.0;
  double w = 0.0;
};

struct JointLaw12 {
  enum class Source { Oracle, MonteCarlo };
  std::vector<JointItem> items;
  Source source = Source::Oracle;

  double total() const {
    double s = 0.0;
    for (const auto& it : items) s += it.w;
    return s;
  }
};

inline JointLaw12 joint_from_ensemble(const PathEnsemble& e, JointLaw12::Source src) {
  if (e.n_levels < 2) throw InputError("joint law needs an ensemble with two levels");
  if (!e.meta.history) throw InputError("joint law needs path histories");
  JointLaw12 j;
  j.source = src;
  j.items.reserve(e.paths.size());
  for (const auto& p : e.paths) j.items.push_back({p.levels[0], p.levels[1].m, p.weight});
  return j;
}

namespace detail {

inline double max1_at_least(const JointItem& it, double y) {
  auto q = max_at_least(it.max1, y);
  if (!q) throw InputError("joint law record cannot decide the first maximum");
  return *q;
}

}  // namespace detail

// E[1{max1 >= y} (zeta - M_2)^+].
inline double f_iAY(const JointLaw12& j, double zeta, double y) {
  double s = 0.0;
  for (const auto& it : j.items)
    if (it.m2 < zeta) s += it.w * detail::max1_at_least(it, y) * (zeta - it.m2);
  return s;
}

// P[max1 >= y, M_2 < zeta], the zeta-derivative from the left; with
// inclusive = true, P[max1 >= y, M_2 <= zeta], the one from the right.
inline double f_iAY_dzeta(const JointLaw12& j, double zeta, double y, bool inclusive = false) {
  double s = 0.0;
  for (const auto& it : j.items) {
    const bool below = inclusive ? it.m2 <= zeta + kRecordEps : it.m2 < zeta - kRecordEps;
    if (below) s += it.w * detail::max1_at_least(it, y);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Windows around the jumps of xi_2

struct JumpWindow {
  double y_lo = 0.0;  // where xi_2 jumps
  double y_hi = 0.0;  // right-continuous inverse of xi_1 at z_hi
  double z_lo = 0.0;  // xi_2 just before the jump
  double z_hi = 0.0;  // xi_2 just after
  bool ignored = false;  // y_hi <= y_lo: the first marginal plays no part
  bool overlap = false;  // shares y-range with another window
};

namespace detail {

inline double snap_to(double t, const std::vector<double>& cands, double tol) {
  for (double c : cands)
    if (std::abs(c - t) <= tol) return c;
  return t;
}

// inf{y >= from : xi_1(y) > z}.
inline double xi1_inverse(const BoundarySet& b, double z, double from) {
  const auto& seq = b.seq;
  auto xi1 = [&](double y) { return levels_at(seq, y, b.opts, 1).back().xi; };
  if (xi1(from) > z) return from;
  std::size_t k = 0;
  while (k < b.size() && (b.y[k] <= from || b.xi[0][k] <= z)) ++k;
  double lo = from, hi;
  if (k == b.size()) {
    hi = std::max(from, z) + 1.0;
    while (xi1(hi) <= z) hi = 2.0 * hi + 1.0;
  } else {
    hi = b.y[k];
    if (k > 0) lo = std::max(lo, b.y[k - 1]);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (xi1(mid) > z)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace detail

// Windows [y_lo, y_hi] x [z_lo, z_hi] for every upward jump of xi_2 off the
// diagonal. Locations are refined by bisection and snapped to atoms and
// barycentres for atomic inputs.
inline std::vector<JumpWindow> jump_windows(const BoundarySet& b, double snap_tol = 1e-6) {
  if (b.levels() < 2) throw InputError("jump windows need at least two levels");
  const auto& seq = b.seq;
  std::vector<double> snap;
  bool atomic = true;
  for (const Marginal& m : seq) atomic = atomic && !m.is_curve();
  if (atomic) snap = jump_candidates(seq);
  auto xi2 = [&](double y) { return levels_at(seq, y, b.opts, 2).back().xi; };
  std::vector<JumpWindow> out;
  for (double t : b.jumps[1]) {
    const std::size_t k = b.find(t);
    if (k == 0 || k == static_cast<std::size_t>(-1)) continue;
    const double before = b.xi[1][k - 1];
    double lo = b.y[k - 1], hi = t;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (std::abs(xi2(mid) - before) <= 1e-12 * std::max(1.0, std::abs(before)))
        lo = mid;
      else
        hi = mid;
    }
    JumpWindow w;
    w.y_lo = detail::snap_to(hi, snap, snap_tol);
    w.z_lo = before;
    // Probe to the right: a constant piece may touch the diagonal where it starts.
    const double probe = w.y_lo + std::min(0.5 * (b.y[k] - w.y_lo) + 0.5 * (b.y[std::min(k + 1, b.size() - 1)] - b.y[k]),
                                           1e-7 * std::max(1.0, w.y_lo));
    w.z_hi = xi2(probe);
    if (w.z_hi >= probe - 1e-12 || !(w.z_hi > w.z_lo)) continue;
    w.y_hi = detail::snap_to(detail::xi1_inverse(b, w.z_hi, 0.0), snap, snap_tol);
    w.ignored = !(w.y_hi > w.y_lo);
    out.push_back(w);
  }
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t c = a + 1; c < out.size(); ++c) {
      if (out[a].ignored || out[c].ignored) continue;
      if (out[a].y_lo < out[c].y_hi && out[c].y_lo < out[a].y_hi)
        out[a].overlap = out[c].overlap = true;
    }
  return out;
}

inline bool in_window(const std::vector<JumpWindow>& ws, double zeta, double y) {
  for (const auto& w : ws)
    if (!w.ignored && zeta >= w.z_lo && zeta <= w.z_hi && y >= w.y_lo && y <= w.y_hi)
      return true;
  return false;
}

// First two stages with the stranded mass diffused across each jump gap:
// the naive xi_2 stage, then an exit from (z_lo, z_hi) for paths whose
// maximum lies in [y_lo, y_hi). Atomic inputs only.
inline ExitProgram tau_prime_program(const MarginalSequence& seq,
                                     const std::vector<JumpWindow>& ws,
                                     const SearchOptions& opt = {}) {
  require_atomic(seq);
  const auto steps = level_steps(seq, opt, 2);
  ExitProgram p;
  p.stages.push_back(Stage{{steps[0]}});
  Stage s2{{steps[1]}};
  for (const auto& w : ws)
    if (!w.ignored) s2.steps.push_back(IntervalRule{w.z_lo, w.z_hi, w.y_lo, w.y_hi});
  p.stages.push_back(s2);
  return p;
}

inline JointLaw12 joint_law_exact(const ExitProgram& tau_prime) {
  return joint_from_ensemble(exact_laws_program(tau_prime), JointLaw12::Source::Oracle);
}

// ---------------------------------------------------------------------------
// Corrected third boundary

// c~3(zeta, y) / (y - zeta): the f-corrected call inside a window, the usual
// level-3 objective elsewhere.
inline double corrected_objective(const MarginalSequence& seq,
                                  const std::vector<LevelPoint>& prior, const JointLaw12& j,
                                  const std::vector<JumpWindow>& ws, double zeta, double y,
                                  const SearchOptions& opt = {}) {
  if (zeta < y && in_window(ws, zeta, y))
    return (seq[2].call(zeta) - f_iAY(j, zeta, y)) / (y - zeta);
  return objective_cn(seq, 3, prior, zeta, y, opt);
}

struct CorrectedPoint {
  double xi = 0.0;
  double K = 0.0;
  bool active = false;  // minimizer sits in a window
};

inline CorrectedPoint corrected_point(const MarginalSequence& seq, const JointLaw12& j,
                                      const std::vector<JumpWindow>& ws, double y,
                                      const SearchOptions& opt = {}) {
  const auto prior = levels_at(seq, y, opt, 2);
  std::vector<double> zs = kink_candidates(seq, 3, prior, y);
  for (const auto& w : ws) {
    if (w.ignored || y < w.y_lo || y > w.y_hi) continue;
    for (double z : {w.z_lo, w.z_hi})
      if (z < y) zs.push_back(z);
    for (const auto& it : j.items)
      if (it.m2 >= w.z_lo && it.m2 <= w.z_hi && it.m2 < y) zs.push_back(it.m2);
  }
  std::sort(zs.begin(), zs.end());
  zs.erase(std::unique(zs.begin(), zs.end()), zs.end());

  std::vector<Candidate> cands;
  for (double z : zs) cands.push_back({z, corrected_objective(seq, prior, j, ws, z, y, opt)});
  cands.push_back({y, objective_cn(seq, 3, prior, y, y, opt)});
  double best = kInf;
  for (const auto& c : cands) best = std::min(best, c.v);
  const double lo = seq[2].l();
  if (opt.refine_points > 1 && lo < y) {
    const double band = opt.tie_rel * std::abs(best) + 1e-15;
    for (int q = 0; q < opt.refine_points; ++q) {
      const double z = lo + (y - lo) * static_cast<double>(q) / opt.refine_points;
      const double v = corrected_objective(seq, prior, j, ws, z, y, opt);
      if (v < best - band) cands.push_back({z, v});
    }
  }
  const std::size_t arg = sup_argmin(cands, opt.tie_rel);
  if (arg == cands.size() || !std::isfinite(cands[arg].v))
    throw NoMinimizer(3, y, "no finite minimizer for the corrected objective");
  CorrectedPoint out;
  out.xi = cands[arg].z;
  out.K = cands[arg].v;
  out.active = out.xi < y && in_window(ws, out.xi, y);
  return out;
}

struct CorrectedBoundary {
  std::vector<double> y;
  std::vector<double> xi3;
  std::vector<double> K3;
  std::vector<char> active;
  std::vector<JumpWindow> windows;
  std::vector<double> foc_residual;  // first-order condition, 0 off the window
  bool non_monotone = false;
  double worst_decrease = 0.0;
  double worst_decrease_at = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> flags;
};

inline CorrectedBoundary corrected_boundary(const MarginalSequence& seq, const JointLaw12& j,
                                            const std::vector<JumpWindow>& ws,
                                            const std::vector<double>& grid,
                                            const SearchOptions& opt = {},
                                            double monotone_tol = 1e-9) {
  if (seq.size() != 3) throw InputError("corrected boundary needs exactly three marginals");
  CorrectedBoundary cb;
  cb.y = grid;
  cb.windows = ws;
  const std::size_t N = grid.size();
  cb.xi3.assign(N, 0.0);
  cb.K3.assign(N, 0.0);
  cb.active.assign(N, 0);
  cb.foc_residual.assign(N, 0.0);
  parallel_for(N, [&](std::size_t k) {
    const double y = grid[k];
    const CorrectedPoint p = corrected_point(seq, j, ws, y, opt);
    cb.xi3[k] = p.xi;
    cb.K3[k] = p.K;
    cb.active[k] = p.active ? 1 : 0;
    if (p.active) {
      // One-sided derivatives of c_3 - f must bracket -K.
      const double gl = seq[2].call_slope_left(p.xi) - f_iAY_dzeta(j, p.xi, y, false);
      const double gr = seq[2].call_slope_right(p.xi) - f_iAY_dzeta(j, p.xi, y, true);
      cb.foc_residual[k] = std::max({0.0, gl + p.K, -(gr + p.K)});
    }
  });
  for (const auto& w : ws) {
    std::ostringstream os;
    os.precision(17);
    if (w.ignored) {
      os << "window at y = " << w.y_lo << " has y_hi = " << w.y_hi << " <= y_lo; ignored";
      cb.flags.push_back(os.str());
    } else if (w.overlap) {
      os << "window [" << w.y_lo << ", " << w.y_hi << "] overlaps another; not resolved";
      cb.flags.push_back(os.str());
    }
  }
  for (std::size_t k = 1; k < N; ++k) {
    const double d = cb.xi3[k - 1] - cb.xi3[k];
    if (d > monotone_tol && d > cb.worst_decrease) {
      cb.worst_decrease = d;
      cb.worst_decrease_at = grid[k];
    }
  }
  if (cb.worst_decrease > 0.0) {
    cb.non_monotone = true;
    std::ostringstream os;
    os.precision(17);
    os << "corrected xi_3 decreases by " << cb.worst_decrease << " at y = "
       << cb.worst_decrease_at;
    cb.flags.push_back(os.str());
  }
  return cb;
}

// The corrected three-stage program: tau'_2 followed by the corrected xi_3
// read off as a step boundary.
inline ExitProgram corrected_program(const MarginalSequence& seq, const JointLaw12& j,
                                     const std::vector<JumpWindow>& ws,
                                     const SearchOptions& opt = {},
                                     const StepScanOptions& so = {}) {
  ExitProgram p = tau_prime_program(seq, ws, opt);
  std::vector<double> snap = jump_candidates(seq);
  for (const auto& w : ws) {
    snap.push_back(w.y_lo);
    snap.push_back(w.y_hi);
  }
  std::sort(snap.begin(), snap.end());
  auto fn = [&](double y) { return corrected_point(seq, j, ws, y, opt).xi; };
  p.stages.push_back(Stage{{extract_steps(fn, scan_top(seq), snap, so)}});
  return p;
}

// ---------------------------------------------------------------------------
// Verification

struct CorrectedTolerances {
  double law_tv = 1e-12;
  double tail = 1e-10;
  double decomposition = 1e-10;
  double foc = 1e-9;
  double monotone = 1e-9;
  double monotonicity_condition = 1e-6;
  double c_tilde = 1e-9;
};

inline CheckReport verify_corrected(const CorrectedBoundary& cb, const MarginalSequence& seq,
                                    const JointLaw12& j, const SearchOptions& opt = {},
                                    const CorrectedTolerances& tol = {}) {
  CheckReport rep;
  const auto& ws = cb.windows;
  const std::size_t N = cb.y.size();
  require_atomic(seq);

  const ExitProgram prog = corrected_program(seq, j, ws, opt);
  const auto& s3 = std::get<StepBoundary>(prog.stages[2].steps[0]);
  const auto laws = exact_level_laws_program(prog, 0.0, cb.y);
  const LevelLaw& L3 = laws[2];

  {
    Check c;
    c.name = "law_m3";
    c.statistic = compare_law(L3, seq[2]).tv.value_or(1.0);
    c.threshold = tol.law_tv;
    c.pass = c.statistic <= c.threshold;
    c.note = "total variation between the law of M_3 and mu_3";
    rep.checks.push_back(c);
  }
  {
    Check c;
    c.name = "law_m2";
    c.statistic = compare_law(laws[1], seq[1]).tv.value_or(1.0);
    c.threshold = tol.law_tv;
    c.pass = c.statistic <= c.threshold;
    c.note = "total variation between the law of M_2 under tau'_2 and mu_2";
    rep.checks.push_back(c);
  }

  // Points next to a change of any stage's boundary are left out: K has a
  // left limit there that differs from the right-continuous value.
  std::vector<double> jumps = s3.jump_points();
  for (const auto& st : prog.stages)
    for (const auto& step : st.steps)
      if (const auto* sb = std::get_if<StepBoundary>(&step))
        for (double t : sb->jump_points()) jumps.push_back(t);
  for (const auto& w : ws) {
    jumps.push_back(w.y_lo);
    jumps.push_back(w.y_hi);
  }
  auto near_jump = [&](double y) {
    for (double t : jumps)
      if (std::abs(y - t) <= 1e-9 * std::max(1.0, std::abs(t))) return true;
    return false;
  };

  Check tail{"K3_tilde_vs_tail", 0.0, tol.tail, true, "", {}};
  Check dec{"decomposition", 0.0, tol.decomposition, true, "", {}};
  Check foc{"first_order_condition", 0.0, tol.foc, true, "", {}};
  for (std::size_t k = 0; k < N; ++k) {
    const double y = cb.y[k];
    if (y <= 0.0 || near_jump(y)) continue;
    const auto t = L3.tail(y);
    if (!t) continue;
    const double d = std::abs(*t - cb.K3[k]);
    if (d > tail.statistic) tail.statistic = d;
    if (d > tol.tail) tail.where.push_back({3, y, "", d});
    if (cb.active[k]) {
      if (cb.foc_residual[k] > foc.statistic) foc.statistic = cb.foc_residual[k];
      if (cb.foc_residual[k] > tol.foc) foc.where.push_back({3, y, "", cb.foc_residual[k]});
    }
  }

  // Decomposition of the tail on active points. Paths stopped exactly on the
  // boundary value with a smaller maximum are taken out of P[M_3 >= xi~3]:
  // with atoms they carry mass, for continuous laws they do not.
  {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < N; ++k)
      if (cb.active[k] && cb.y[k] > 0.0 && !near_jump(cb.y[k])) idx.push_back(k);
    std::vector<double> res(idx.size(), 0.0);
    parallel_for(idx.size(), [&](std::size_t q) {
      const std::size_t k = idx[q];
      const double y = cb.y[k], z = cb.xi3[k];
      const PathEnsemble e = exact_laws_program(prog, 0.0, {y});
      double tail_y = 0.0, ge = 0.0, on_below = 0.0;
      for (const auto& p : e.paths) {
        const LevelRecord& r = p.levels[2];
        const double a = max_at_least(r, y).value_or(0.0);
        tail_y += p.weight * a;
        if (r.m >= z - kRecordEps) ge += p.weight;
        if (std::abs(r.m - z) <= kRecordEps) on_below += p.weight * (1.0 - a);
      }
      res[q] = std::abs(tail_y - (ge - on_below) - f_iAY_dzeta(j, z, y));
    });
    for (std::size_t q = 0; q < idx.size(); ++q) {
      if (res[q] > dec.statistic) dec.statistic = res[q];
      if (res[q] > tol.decomposition) dec.where.push_back({3, cb.y[idx[q]], "", res[q]});
    }
  }
  tail.pass = tail.where.empty();
  tail.note = "|K~3(y) - P[max_3 >= y]| away from jumps";
  dec.pass = dec.where.empty();
  dec.note =
      "P[max_3 >= y] - P[M_3 >= xi~3(y)] - P[max_1 >= y, M_2 < xi~3(y)] on the window, "
      "boundary atoms with max_3 < y excluded";
  foc.pass = foc.where.empty();
  foc.note = "one-sided derivatives of c_3 - f around the minimizer bracket -K~3";
  rep.checks.push_back(tail);
  rep.checks.push_back(dec);
  rep.checks.push_back(foc);

  {
    Check c{"monotone", cb.worst_decrease, tol.monotone, !cb.non_monotone, "", {}};
    c.note = "largest decrease of xi~3 between grid points";
    rep.checks.push_back(c);
  }

  // -dK~3/dy + d2f/dzeta dy >= 0 by one-cell differences, on active cells.
  {
    Check c{"monotonicity_condition", 0.0, tol.monotonicity_condition, true, "", {}};
    for (std::size_t k = 0; k + 1 < N; ++k) {
      if (!cb.active[k] || !cb.active[k + 1]) continue;
      const double y0 = cb.y[k], y1 = cb.y[k + 1];
      if (near_jump(y0) || near_jump(y1)) continue;
      const double h = y1 - y0;
      const double z = cb.xi3[k];
      const double lhs = -(cb.K3[k + 1] - cb.K3[k]) / h +
                         (f_iAY_dzeta(j, z, y1) - f_iAY_dzeta(j, z, y0)) / h;
      if (-lhs > c.statistic) c.statistic = -lhs;
      if (lhs < -tol.monotonicity_condition) c.where.push_back({3, y0, "", lhs});
    }
    c.pass = c.where.empty();
    c.note = "largest violation of the monotonicity condition (finite differences)";
    rep.checks.push_back(c);
  }

  // c~3 <= c^3 and continuity at the window edges
  {
    Check le{"c_tilde_le_c3", 0.0, tol.c_tilde, true, "", {}};
    Check edge{"c_tilde_edges", 0.0, tol.c_tilde, true, "", {}};
    for (const auto& w : ws) {
      if (w.ignored) continue;
      for (int a = 0; a <= 20; ++a) {
        const double y = w.y_lo + (w.y_hi - w.y_lo) * a / 20.0;
        const auto prior = levels_at(seq, y, opt, 2);
        auto c3 = [&](double z) { return objective_cn(seq, 3, prior, z, y, opt) * (y - z); };
        for (int b = 0; b <= 20; ++b) {
          const double z = w.z_lo + (w.z_hi - w.z_lo) * b / 20.0;
          if (z >= y) continue;
          const double tilde = seq[2].call(z) - f_iAY(j, z, y);
          const double d = tilde - c3(z);
          if (d > le.statistic) le.statistic = d;
          if (d > tol.c_tilde) le.where.push_back({3, y, "", d});
        }
        if (w.z_hi < y) {
          const double d = std::abs(seq[2].call(w.z_hi) - f_iAY(j, w.z_hi, y) - c3(w.z_hi));
          if (d > edge.statistic) edge.statistic = d;
          if (d > tol.c_tilde) edge.where.push_back({3, y, "", d});
        }
      }
    }
    le.pass = le.where.empty();
    le.note = "c~3 - c^3 on a grid over each window";
    edge.pass = edge.where.empty();
    edge.note = "|c~3 - c^3| at zeta = z_hi across each window";
    rep.checks.push_back(le);
    rep.checks.push_back(edge);
  }
  return rep;
}

}  // namespace iay
