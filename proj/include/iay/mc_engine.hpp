#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/errors.hpp"
#include "iay/oracle.hpp"
#include "iay/parallel.hpp"
#include "iay/rng.hpp"

namespace iay {

enum class Lookup { Auto, Step, Linear };

struct SimOptions {
  std::uint64_t n_paths = 100000;
  double dt = 0.0;  // 0: 1e-4 of the squared support span
  std::uint64_t seed = 1;
  std::uint64_t max_steps = 10000000;
  bool exact_exit = true;  // only used when every marginal is atomic
  bool track_min = false;
  Lookup lookup = Lookup::Auto;
  double max_truncated_fraction = 1e-3;
  unsigned threads = 0;
};

inline double default_dt(const MarginalSequence& seq) {
  double lo = 0.0, hi = 0.0;
  for (const Marginal& m : seq) {
    lo = std::min(lo, m.l());
    hi = std::max(hi, m.r());
  }
  const double span = std::max(hi - lo, 1e-6);
  return 1e-4 * span * span;
}

namespace detail {

struct PathState {
  double x = 0.0;
  double M = 0.0;
  double mn = 0.0;
};

// Brownian motion from x, stopped on leaving (v, t). Samples which side is
// hit, the running max when v is hit first, and optionally the running min
// when t is hit first.
inline void exit_sample(PathState& s, double v, double t, PathStream& rs, bool track_min) {
  const double x = s.x;
  const double pl = (t - x) / (t - v);
  if (rs.uniform() <= pl) {
    const double V = rs.uniform();
    const double sup = ((x - v) * t + V * v * (t - x)) / ((x - v) + V * (t - x));
    s.M = std::max(s.M, std::min(sup, t));
    s.x = v;
    s.mn = std::min(s.mn, v);
  } else {
    if (track_min) {
      const double W = rs.uniform();
      const double inf = (W * t * (x - v) + v * (t - x)) / ((t - x) + W * (x - v));
      s.mn = std::min(s.mn, std::max(inf, v));
    }
    s.x = t;
    s.M = std::max(s.M, t);
  }
}

inline void run_step_boundary(PathState& s, const StepBoundary& sb, PathStream& rs,
                              bool track_min) {
  for (;;) {
    const std::size_t q = sb.index_at(s.M);
    const StepPiece& p = sb.pieces[q];
    if (p.diagonal || s.x <= p.v + kRecordEps) return;
    if (q + 1 >= sb.pieces.size())
      throw NonStepBoundary("boundary does not reach the diagonal");
    exit_sample(s, p.v, sb.pieces[q + 1].t, rs, track_min);
    if (s.x == p.v) return;
  }
}

inline void run_interval_rule(PathState& s, const IntervalRule& r, PathStream& rs,
                              bool track_min) {
  const bool inside = s.x > r.lower + kRecordEps && s.x < r.upper - kRecordEps;
  const bool cond = s.M >= r.max_lo - kRecordEps && s.M < r.max_hi - kRecordEps;
  if (inside && cond) exit_sample(s, r.lower, r.upper, rs, track_min);
}

inline PathEnsemble assemble(int n_levels, std::vector<PathRecord>& recs,
                             std::vector<char>& truncated, const SimOptions& o) {
  PathEnsemble e;
  e.n_levels = n_levels;
  std::uint64_t bad = 0;
  for (char t : truncated) bad += t ? 1 : 0;
  const double frac = static_cast<double>(bad) / static_cast<double>(std::max<std::uint64_t>(1, o.n_paths));
  if (frac > o.max_truncated_fraction) {
    std::ostringstream os;
    os << bad << " of " << o.n_paths << " paths exceeded max_steps (fraction " << frac
       << " > " << o.max_truncated_fraction << ")";
    throw SimulationFailure(os.str());
  }
  const double w = 1.0 / static_cast<double>(o.n_paths - bad);
  for (std::size_t p = 0; p < recs.size(); ++p) {
    if (truncated[p]) continue;
    recs[p].weight = w;
    e.paths.push_back(std::move(recs[p]));
  }
  e.meta.exact = false;
  e.meta.n_paths = o.n_paths;
  e.meta.seed = o.seed;
  e.meta.truncated = bad;
  e.meta.history = true;
  return e;
}

}  // namespace detail

// Monte Carlo run of an exit program with exact two-barrier exit sampling; no
// time discretization at all.
inline PathEnsemble simulate_program(const ExitProgram& prog, const SimOptions& o) {
  if (o.n_paths == 0) throw InputError("n_paths must be positive");
  const int n = static_cast<int>(prog.stages.size());
  std::vector<PathRecord> recs(o.n_paths);
  std::vector<char> truncated(o.n_paths, 0);
  parallel_for(
      o.n_paths,
      [&](std::size_t p) {
        PathStream rs(o.seed, p);
        detail::PathState s;
        PathRecord& rec = recs[p];
        rec.levels.reserve(n);
        for (const Stage& st : prog.stages) {
          for (const ProgramStep& step : st.steps) {
            if (const auto* sb = std::get_if<StepBoundary>(&step))
              detail::run_step_boundary(s, *sb, rs, o.track_min);
            else
              detail::run_interval_rule(s, std::get<IntervalRule>(step), rs, o.track_min);
          }
          rec.levels.push_back(LevelRecord{s.x, s.M, s.M});
        }
        if (o.track_min) rec.min_value = s.mn;
      },
      o.threads);
  PathEnsemble e = detail::assemble(n, recs, truncated, o);
  e.meta.exact_exit = true;
  return e;
}

// Boundary value at running max M, read off the grid. Beyond the grid, and
// wherever the grid reports xi >= y, the boundary is the diagonal.
inline double boundary_lookup(const BoundarySet& b, int level, double M, bool linear) {
  const auto& y = b.y;
  const auto& xi = b.xi[level - 1];
  if (y.empty() || M > y.back() + 1e-12) return M;
  auto it = std::upper_bound(y.begin(), y.end(), M + 1e-15);
  std::size_t k = it == y.begin() ? 0 : static_cast<std::size_t>(it - y.begin()) - 1;
  if (xi[k] >= y[k] - 1e-12) return M;
  double v = xi[k];
  if (linear && k + 1 < y.size() && M > y[k]) {
    const bool jump = b.is_jump(level, y[k + 1]);
    const bool diag_next = xi[k + 1] >= y[k + 1] - 1e-12;
    if (!jump && !diag_next) v += (xi[k + 1] - v) * (M - y[k]) / (y[k + 1] - y[k]);
  }
  return std::min(v, M);
}

// Time-stepping Monte Carlo with Gaussian increments of variance dt.
inline PathEnsemble simulate_stepping(const BoundarySet& b, SimOptions o) {
  if (o.n_paths == 0) throw InputError("n_paths must be positive");
  if (o.dt <= 0.0) o.dt = default_dt(b.seq);
  bool linear = false;
  if (o.lookup == Lookup::Linear) linear = true;
  if (o.lookup == Lookup::Auto)
    for (const Marginal& m : b.seq) linear = linear || m.is_curve();
  const int n = b.levels();
  const double sd = std::sqrt(o.dt);
  std::vector<PathRecord> recs(o.n_paths);
  std::vector<char> truncated(o.n_paths, 0);
  parallel_for(
      o.n_paths,
      [&](std::size_t p) {
        PathStream rs(o.seed, p);
        double x = 0.0, M = 0.0, mn = 0.0;
        std::uint64_t steps = 0;
        PathRecord& rec = recs[p];
        for (int i = 1; i <= n; ++i) {
          double bv = boundary_lookup(b, i, M, linear);
          while (x > bv) {
            if (++steps > o.max_steps) {
              truncated[p] = 1;
              return;
            }
            x += sd * rs.normal();
            if (x < mn) mn = x;
            if (x > M) {
              M = x;
              bv = boundary_lookup(b, i, M, linear);
            }
          }
          rec.levels.push_back(LevelRecord{x, M, M});
        }
        if (o.track_min) rec.min_value = mn;
      },
      o.threads);
  PathEnsemble e = detail::assemble(n, recs, truncated, o);
  e.meta.dt = o.dt;
  return e;
}

inline bool all_atomic(const MarginalSequence& seq) {
  for (const Marginal& m : seq)
    if (m.is_curve()) return false;
  return true;
}

// Exact-exit sampling for atomic inputs when requested, time stepping
// otherwise.
inline PathEnsemble simulate(const BoundarySet& b, const SimOptions& o) {
  if (o.exact_exit && all_atomic(b.seq)) {
    SearchOptions so = b.opts;
    const auto steps = level_steps(b.seq, so, b.levels());
    return simulate_program(program_from_steps(steps), o);
  }
  return simulate_stepping(b, o);
}

}  // namespace iay
