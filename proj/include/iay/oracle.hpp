#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <utility>
#include <variant>
#include <vector>

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/errors.hpp"
#include "iay/measures.hpp"

namespace iay {

// Probability that Brownian motion started at x hits a before b.
inline double exit_prob(double x, double a, double b) {
  if (!(a < b) || x < a || x > b) {
    std::ostringstream os;
    os << "exit_prob: need a <= x <= b and a < b, got (" << x << ", " << a << ", " << b << ")";
    throw InputError(os.str());
  }
  return (b - x) / (b - a);
}

// ---------------------------------------------------------------------------
// Step boundaries

struct StepPiece {
  double t;        // piece starts here and runs to the next piece
  bool diagonal;   // xi(y) = y on the piece
  double v;        // constant value otherwise
};

// Right-continuous, piecewise constant boundary that ends on the diagonal.
struct StepBoundary {
  std::vector<StepPiece> pieces;

  std::size_t index_at(double y) const {
    std::size_t lo = 0;
    for (std::size_t q = 0; q < pieces.size(); ++q)
      if (pieces[q].t <= y + 1e-12 * std::max(1.0, std::abs(y))) lo = q;
    return lo;
  }
  const StepPiece& piece_at(double y) const { return pieces[index_at(y)]; }
  double value(double y) const {
    const StepPiece& p = piece_at(y);
    return p.diagonal ? y : p.v;
  }
  std::vector<double> jump_points() const {
    std::vector<double> t;
    for (std::size_t q = 1; q < pieces.size(); ++q) t.push_back(pieces[q].t);
    return t;
  }
};

struct StepScanOptions {
  std::size_t scan_points = 2000;
  std::size_t max_pieces = 20000;
  double snap_tol = 1e-6;
};

namespace detail {

inline bool same_piece(const StepPiece& p, double y, double x) {
  if (p.diagonal) return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y));
  return std::abs(x - p.v) <= 1e-12 * std::max(1.0, std::abs(p.v));
}

// Decides the piece that starts at t from a probe just to its right, since
// at t itself a constant piece can touch the diagonal.
inline StepPiece classify(const std::function<double(double)>& xi, double t, double next) {
  const double probe = t + std::min(0.5 * (next - t), 1e-7 * std::max(1.0, std::abs(t)));
  const double x = xi(probe);
  if (std::abs(x - probe) <= 1e-12 * std::max(1.0, std::abs(probe))) return {t, true, 0.0};
  return {t, false, x};
}

}  // namespace detail

// Reads a boundary y -> xi(y) on [0, y_max] as a step function. Changes are
// located by scanning and then bisection, and the location is snapped to a
// known candidate (atom, barycentre) when one lies within snap_tol.
inline StepBoundary extract_steps(const std::function<double(double)>& xi, double y_max,
                                  const std::vector<double>& snap = {},
                                  const StepScanOptions& so = {}) {
  StepBoundary sb;
  const std::size_t S = std::max<std::size_t>(so.scan_points, 2);
  sb.pieces.push_back(detail::classify(xi, 0.0, y_max / static_cast<double>(S)));
  double prev = 0.0;
  for (std::size_t q = 1; q <= S; ++q) {
    const double yq = y_max * static_cast<double>(q) / static_cast<double>(S);
    while (!detail::same_piece(sb.pieces.back(), yq, xi(yq))) {
      double lo = prev, hi = yq;
      for (int it = 0; it < 200 && hi - lo > 4e-16 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::same_piece(sb.pieces.back(), mid, xi(mid)))
          lo = mid;
        else
          hi = mid;
      }
      double t = hi;
      for (double c : snap) {
        if (std::abs(c - hi) <= so.snap_tol && c > prev &&
            !detail::same_piece(sb.pieces.back(), c, xi(c))) {
          t = c;
          break;
        }
      }
      sb.pieces.push_back(detail::classify(xi, t, yq));
      prev = t;
      if (sb.pieces.size() > so.max_pieces)
        throw NonStepBoundary("boundary is not piecewise constant (too many pieces)");
    }
    prev = yq;
  }
  if (!sb.pieces.back().diagonal)
    throw NonStepBoundary("boundary does not reach the diagonal within the scanned range");
  return sb;
}

// Candidate jump locations for atomic sequences: atoms and barycentres.
inline std::vector<double> jump_candidates(const MarginalSequence& seq) {
  std::vector<double> c = {0.0};
  for (const Marginal& m : seq)
    for (const Atom& a : m.atoms()) {
      if (a.x >= 0.0) c.push_back(a.x);
      const double b = barycentre(m, a.x);
      if (b >= 0.0) c.push_back(b);
    }
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

inline double scan_top(const MarginalSequence& seq) {
  double r = 0.0;
  for (const Marginal& m : seq) r = std::max(r, m.r());
  return r * 1.05 + 1e-3;
}

// Step form of the computed boundaries xi_1..xi_levels.
inline std::vector<StepBoundary> level_steps(const MarginalSequence& seq,
                                             const SearchOptions& opt = {}, int levels = -1,
                                             const StepScanOptions& so = {}) {
  if (levels < 0) levels = static_cast<int>(seq.size());
  const auto snap = jump_candidates(seq);
  std::vector<StepBoundary> out;
  for (int i = 1; i <= levels; ++i) {
    auto fn = [&](double y) { return levels_at(seq, y, opt, i).back().xi; };
    out.push_back(extract_steps(fn, scan_top(seq), snap, so));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exit programs

// Exit from (lower, upper) for paths whose value lies strictly inside and
// whose running maximum sits in [max_lo, max_hi); others are left alone.
struct IntervalRule {
  double lower;
  double upper;
  double max_lo = -std::numeric_limits<double>::infinity();
  double max_hi = std::numeric_limits<double>::infinity();
};

using ProgramStep = std::variant<StepBoundary, IntervalRule>;

struct Stage {
  std::vector<ProgramStep> steps;
};

struct ExitProgram {
  std::vector<Stage> stages;
};

inline ExitProgram program_from_steps(const std::vector<StepBoundary>& steps) {
  ExitProgram p;
  for (const auto& s : steps) p.stages.push_back(Stage{{s}});
  return p;
}

struct LevelLaw {
  std::vector<std::pair<LevelRecord, double>> items;

  std::optional<double> tail(double y) const {
    double s = 0.0;
    for (const auto& [r, w] : items) {
      auto q = max_at_least(r, y);
      if (!q) return std::nullopt;
      s += w * *q;
    }
    return s;
  }
  std::map<double, double> values(double tol = 1e-9) const {
    std::map<double, double> raw, out;
    for (const auto& [r, w] : items) raw[r.m] += w;
    for (const auto& [x, w] : raw) {
      if (!out.empty() && x - std::prev(out.end())->first <= tol)
        std::prev(out.end())->second += w;
      else
        out[x] = w;
    }
    return out;
  }
  double mass_near(double x, double tol = 1e-9) const {
    double s = 0.0;
    for (const auto& [r, w] : items)
      if (std::abs(r.m - x) <= tol) s += w;
    return s;
  }
  double total() const {
    double s = 0.0;
    for (const auto& it : items) s += it.second;
    return s;
  }
};

inline std::vector<LevelLaw> level_laws(const PathEnsemble& e) {
  std::vector<LevelLaw> out(e.n_levels);
  for (const auto& p : e.paths)
    for (int i = 0; i < e.n_levels; ++i) out[i].items.push_back({p.levels[i], p.weight});
  return out;
}

namespace detail {

inline constexpr double kNoLaw = -1e308;

struct ChainState {
  double x;
  int k;
  bool point;
  double x0;
  double v;
};

struct Engine {
  std::vector<double> T;

  std::size_t threshold_index(double y) const {
    for (std::size_t q = 0; q < T.size(); ++q)
      if (std::abs(T[q] - y) <= 1e-12 * std::max(1.0, std::abs(y))) return q;
    return static_cast<std::size_t>(-1);
  }

  static ChainState absorbed(const ChainState& s, double at) {
    ChainState a = s;
    a.x = at;
    if (s.point) {
      a.point = false;
      a.x0 = s.x;
      a.v = at;
    } else {
      a.x0 = kNoLaw;
      a.v = kNoLaw;
    }
    return a;
  }

  template <class Emit>
  void run_boundary(ChainState s, double w, const std::vector<char>& diag,
                    const std::vector<double>& val, Emit&& emit) const {
    for (;;) {
      const std::size_t k = static_cast<std::size_t>(s.k);
      if (diag[k] || s.x <= val[k] + kRecordEps) {
        emit(s, w);
        return;
      }
      if (k + 1 >= T.size())
        throw NonStepBoundary("boundary does not reach the diagonal below the top threshold");
      const double up = T[k + 1], lo = val[k];
      const double pl = (up - s.x) / (up - lo);
      emit(absorbed(s, lo), w * pl);
      s.x = up;
      s.k += 1;
      s.point = true;
      s.x0 = kNoLaw;
      s.v = kNoLaw;
      w *= 1.0 - pl;
      if (w == 0.0) return;
    }
  }

  template <class Emit>
  void run_rule(ChainState s, double w, const IntervalRule& r, Emit&& emit) const {
    const std::size_t k = static_cast<std::size_t>(s.k);
    const bool inside = s.x > r.lower + kRecordEps && s.x < r.upper - kRecordEps;
    const bool cond = T[k] >= r.max_lo - kRecordEps && T[k] < r.max_hi - kRecordEps;
    if (!inside || !cond) {
      emit(s, w);
      return;
    }
    if (r.upper <= T[k] + kRecordEps) {
      const double pl = (r.upper - s.x) / (r.upper - r.lower);
      ChainState a = s, b = s;
      a.x = r.lower;
      b.x = r.upper;
      emit(a, w * pl);
      emit(b, w * (1.0 - pl));
      return;
    }
    for (;;) {
      const std::size_t kk = static_cast<std::size_t>(s.k);
      if (kk + 1 >= T.size()) throw InputError("interval rule upper level is not a threshold");
      const double up = T[kk + 1];
      const double pl = (up - s.x) / (up - r.lower);
      emit(absorbed(s, r.lower), w * pl);
      s.x = up;
      s.k += 1;
      s.point = true;
      s.x0 = kNoLaw;
      s.v = kNoLaw;
      w *= 1.0 - pl;
      if (up >= r.upper - kRecordEps || w == 0.0) {
        if (w != 0.0) emit(s, w);
        return;
      }
    }
  }
};

inline LevelRecord to_record(const ChainState& s, const std::vector<double>& T) {
  LevelRecord r;
  r.m = s.x;
  r.max_lo = T[s.k];
  r.max_hi = s.point ? T[s.k] : T[s.k + 1];
  r.x0 = s.x0 == kNoLaw ? std::numeric_limits<double>::quiet_NaN() : s.x0;
  r.v = s.v == kNoLaw ? std::numeric_limits<double>::quiet_NaN() : s.v;
  return r;
}

inline void push_state(std::vector<double>& key, const ChainState& s) {
  key.push_back(s.x);
  key.push_back(static_cast<double>(s.k));
  key.push_back(s.point ? 1.0 : 0.0);
  key.push_back(s.x0);
  key.push_back(s.v);
}

inline ChainState pop_state(const std::vector<double>& key, std::size_t at) {
  return {key[at], static_cast<int>(key[at + 1]), key[at + 2] != 0.0, key[at + 3], key[at + 4]};
}

inline std::vector<double> thresholds_for(const ExitProgram& prog, double start,
                                          const std::vector<double>& query) {
  std::vector<double> structural = {start};
  for (const auto& st : prog.stages)
    for (const auto& step : st.steps) {
      if (const auto* sb = std::get_if<StepBoundary>(&step)) {
        for (const auto& p : sb->pieces)
          if (p.t > start) structural.push_back(p.t);
      } else {
        const auto& r = std::get<IntervalRule>(step);
        for (double v : {r.lower, r.upper, r.max_lo, r.max_hi})
          if (std::isfinite(v) && v > start) structural.push_back(v);
      }
    }
  std::sort(structural.begin(), structural.end());
  std::vector<double> T;
  for (double v : structural)
    if (T.empty() || v - T.back() > 1e-12 * std::max(1.0, std::abs(v))) T.push_back(v);
  std::vector<double> extra;
  for (double q : query) {
    if (!(q > start)) continue;
    auto it = std::lower_bound(T.begin(), T.end(), q);
    const double tol = 1e-12 * std::max(1.0, std::abs(q));
    if (it != T.end() && std::abs(*it - q) <= tol) continue;
    if (it != T.begin() && std::abs(*(it - 1) - q) <= tol) continue;
    extra.push_back(q);
  }
  T.insert(T.end(), extra.begin(), extra.end());
  std::sort(T.begin(), T.end());
  T.erase(std::unique(T.begin(), T.end()), T.end());
  return T;
}

// Runs the chain. With history the key holds every finished level plus the
// live state; without it only the live state, and per-level laws are
// snapshotted after each stage.
inline void run_program(const ExitProgram& prog, double start, const std::vector<double>& query,
                        bool history, PathEnsemble* joint, std::vector<LevelLaw>* laws) {
  Engine eng;
  eng.T = thresholds_for(prog, start, query);
  const std::size_t nT = eng.T.size();

  std::map<std::vector<double>, double> states;
  {
    std::vector<double> key;
    push_state(key, ChainState{start, 0, true, kNoLaw, kNoLaw});
    states[key] = 1.0;
  }
  const int n = static_cast<int>(prog.stages.size());
  for (int stage = 0; stage < n; ++stage) {
    for (const auto& step : prog.stages[stage].steps) {
      std::map<std::vector<double>, double> next;
      std::vector<char> diag;
      std::vector<double> val;
      const StepBoundary* sb = std::get_if<StepBoundary>(&step);
      if (sb) {
        diag.resize(nT);
        val.resize(nT);
        for (std::size_t k = 0; k < nT; ++k) {
          const StepPiece& p = sb->piece_at(eng.T[k]);
          diag[k] = p.diagonal;
          val[k] = p.v;
        }
      }
      for (const auto& [key, w] : states) {
        const std::size_t at = key.size() - 5;
        const ChainState s = pop_state(key, at);
        auto emit = [&](const ChainState& o, double ww) {
          if (ww == 0.0) return;
          std::vector<double> nk(key.begin(), key.begin() + static_cast<long>(at));
          push_state(nk, o);
          next[nk] += ww;
        };
        if (sb)
          eng.run_boundary(s, w, diag, val, emit);
        else
          eng.run_rule(s, w, std::get<IntervalRule>(step), emit);
      }
      states.swap(next);
    }
    // Close the stage: record it.
    std::map<std::vector<double>, double> next;
    LevelLaw law;
    for (const auto& [key, w] : states) {
      const std::size_t at = key.size() - 5;
      const ChainState s = pop_state(key, at);
      const LevelRecord rec = to_record(s, eng.T);
      if (laws) law.items.push_back({rec, w});
      std::vector<double> nk;
      if (history) {
        nk.assign(key.begin(), key.begin() + static_cast<long>(at));
        nk.insert(nk.end(), {rec.m, rec.max_lo, rec.max_hi, s.x0, s.v});
      }
      push_state(nk, s);
      next[nk] += w;
    }
    if (laws) laws->push_back(std::move(law));
    states.swap(next);
  }
  if (joint) {
    joint->n_levels = n;
    joint->meta.exact = true;
    joint->meta.history = true;
    joint->paths.clear();
    for (const auto& [key, w] : states) {
      PathRecord p;
      p.weight = w;
      for (int i = 0; i < n; ++i) {
        const std::size_t b = static_cast<std::size_t>(i) * 5;
        LevelRecord r;
        r.m = key[b];
        r.max_lo = key[b + 1];
        r.max_hi = key[b + 2];
        r.x0 = key[b + 3] == kNoLaw ? std::numeric_limits<double>::quiet_NaN() : key[b + 3];
        r.v = key[b + 4] == kNoLaw ? std::numeric_limits<double>::quiet_NaN() : key[b + 4];
        p.levels.push_back(r);
      }
      joint->paths.push_back(std::move(p));
    }
    joint->meta.n_paths = joint->paths.size();
  }
}

}  // namespace detail

// Exact joint law of all stages (values and maxima) under the program.
inline PathEnsemble exact_laws_program(const ExitProgram& prog, double start = 0.0,
                                       const std::vector<double>& query = {}) {
  PathEnsemble e;
  detail::run_program(prog, start, query, true, &e, nullptr);
  return e;
}

// Per-stage laws only; much cheaper on fine query grids.
inline std::vector<LevelLaw> exact_level_laws_program(const ExitProgram& prog,
                                                      double start = 0.0,
                                                      const std::vector<double>& query = {}) {
  std::vector<LevelLaw> laws;
  detail::run_program(prog, start, query, false, nullptr, &laws);
  return laws;
}

inline void require_atomic(const MarginalSequence& seq) {
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (seq[i].is_curve())
      throw InputError("exact oracle needs atomic marginals; marginal " + std::to_string(i + 1) +
                       " is a call curve");
}

inline PathEnsemble exact_laws_boundaries(const MarginalSequence& seq,
                                          const SearchOptions& opt = {},
                                          const std::vector<double>& query = {},
                                          int levels = -1) {
  require_atomic(seq);
  return exact_laws_program(program_from_steps(level_steps(seq, opt, levels)), 0.0, query);
}

inline std::vector<LevelLaw> exact_level_laws_boundaries(const MarginalSequence& seq,
                                                         const SearchOptions& opt = {},
                                                         const std::vector<double>& query = {},
                                                         int levels = -1) {
  require_atomic(seq);
  return exact_level_laws_program(program_from_steps(level_steps(seq, opt, levels)), 0.0, query);
}

// E[M̄_level], exact when every record carries its cell law.
inline std::optional<double> mean_max(const LevelLaw& law) {
  double s = 0.0;
  for (const auto& [r, w] : law.items) {
    auto m = max_mean(r);
    if (!m) return std::nullopt;
    s += w * *m;
  }
  return s;
}

}  // namespace iay
