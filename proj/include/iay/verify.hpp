#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iay/boundaries.hpp"
#include "iay/ensemble.hpp"
#include "iay/measures.hpp"
#include "iay/oracle.hpp"
#include "iay/parallel.hpp"

namespace iay {

struct Violation {
  int level = 0;
  double y = 0.0;
  std::string what;
  double mass = 0.0;
};

struct Check {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = true;
  std::string note;
  std::vector<Violation> where;
};

struct CheckReport {
  std::vector<Check> checks;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Laws of M_level

struct LawComparison {
  double ks = 0.0;
  std::optional<double> tv;  // only when both sides sit on atoms
  double unmatched_mass = 0.0;
};

// KS over the merged support (values within tol are one point), and total
// variation after snapping ensemble values to target atoms within tol.
inline LawComparison compare_law(const LevelLaw& law, const Marginal& target, double tol = 1e-9,
                                 bool atomic_ensemble = true) {
  LawComparison out;
  const auto emp = law.values(tol);
  std::vector<double> pts;
  for (const auto& [x, w] : emp) pts.push_back(x);
  for (const Atom& a : target.atoms()) pts.push_back(a.x);
  std::sort(pts.begin(), pts.end());
  std::vector<double> merged;
  for (double p : pts)
    if (merged.empty() || p - merged.back() > tol) merged.push_back(p);

  const double total = law.total();
  auto Femp = [&](double x) {
    double s = 0.0;
    for (const auto& [v, w] : emp)
      if (v <= x + tol) s += w;
    return s / total;
  };
  auto Ftar = [&](double x) {
    double s = 0.0;
    for (const Atom& a : target.atoms())
      if (a.x <= x + tol) s += a.w;
    return s;
  };
  for (double x : merged) out.ks = std::max(out.ks, std::abs(Femp(x) - Ftar(x)));

  if (atomic_ensemble) {
    std::map<std::size_t, double> at;
    double unmatched = 0.0;
    const auto& atoms = target.atoms();
    for (const auto& [v, w] : emp) {
      auto it = std::lower_bound(atoms.begin(), atoms.end(), v - tol,
                                 [](const Atom& a, double x) { return a.x < x; });
      if (it != atoms.end() && std::abs(it->x - v) <= tol)
        at[static_cast<std::size_t>(it - atoms.begin())] += w / total;
      else
        unmatched += w / total;
    }
    double tv = unmatched;
    for (std::size_t q = 0; q < atoms.size(); ++q) {
      auto it = at.find(q);
      tv += std::abs((it == at.end() ? 0.0 : it->second) - atoms[q].w);
    }
    out.tv = 0.5 * tv;
    out.unmatched_mass = unmatched;
  }
  return out;
}

inline LawComparison compare_law(const PathEnsemble& e, int level, const Marginal& target,
                                 double tol = 1e-9) {
  return compare_law(level_laws(e)[level - 1], target, tol, true);
}

// Atom masses of a sample against reference masses, in units of the binomial
// standard deviation sqrt(p(1-p)/N).
struct MassComparison {
  double max_z = 0.0;
  double worst_at = 0.0;
  double max_abs = 0.0;
  bool pass = true;
};

inline MassComparison compare_masses(const LevelLaw& sample, const LevelLaw& reference,
                                     double n_paths, double sigmas = 3.0, double tol = 1e-9) {
  MassComparison out;
  for (const auto& [x, p] : reference.values(tol)) {
    const double q = sample.mass_near(x, tol) / sample.total();
    const double sd = std::sqrt(std::max(p * (1.0 - p), 1e-300) / n_paths);
    const double z = std::abs(q - p) / sd;
    out.max_abs = std::max(out.max_abs, std::abs(q - p));
    if (z > out.max_z) {
      out.max_z = z;
      out.worst_at = x;
    }
  }
  out.pass = out.max_z <= sigmas;
  return out;
}

// ---------------------------------------------------------------------------
// Law of the maximum

struct MaxLawResult {
  double sup_dev = 0.0;
  double at_y = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;      // near jumps
  std::size_t undecided = 0;    // records that cannot resolve y
  double left_limit_dev = 0.0;  // tail at a jump vs left limit of K
  std::size_t jump_points = 0;
};

// Compares P[M̄_level >= y] with K_level(y) on the boundary grid (or a given
// subset of it). Points at or next to a jump of any level <= level are
// skipped; at the jumps themselves the tail is compared with K's left limit.
inline MaxLawResult max_law_check(const LevelLaw& law, const BoundarySet& b, int level,
                                  const std::vector<double>& ys = {}) {
  MaxLawResult out;
  const std::vector<double>& grid = ys.empty() ? b.y : ys;
  for (double y : grid) {
    const std::size_t k = b.find(y);
    if (k == static_cast<std::size_t>(-1)) continue;
    const bool jump_here = b.near_jump(level, y);
    const bool jump_next = k + 1 < b.size() && b.near_jump(level, b.y[k + 1]);
    const auto t = law.tail(y);
    if (!t) {
      ++out.undecided;
      continue;
    }
    if (jump_here) {
      ++out.jump_points;
      out.left_limit_dev = std::max(out.left_limit_dev, std::abs(*t - b.K_left(level, y)));
      ++out.skipped;
      continue;
    }
    if (jump_next) {
      ++out.skipped;
      continue;
    }
    const double d = std::abs(*t - b.K[level - 1][k]);
    ++out.checked;
    if (d > out.sup_dev) {
      out.sup_dev = d;
      out.at_y = y;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Relations between M and M̄

struct RelationOptions {
  double premise_eps = 1e-12;
  double conclusion_eps = 1e-9;
  double increase_slope = 1e-8;
  double identity_tol = 1e-10;
};

// xi_level strictly increasing at grid point k: both neighbour slopes exceed
// the threshold. Endpoints of the grid are never counted.
inline bool strictly_increasing_at(const BoundarySet& b, int level, std::size_t k,
                                   double slope = 1e-8) {
  if (k == 0 || k + 1 >= b.size()) return false;
  const auto& xi = b.xi[level - 1];
  const double sl = (xi[k] - xi[k - 1]) / (b.y[k] - b.y[k - 1]);
  const double sr = (xi[k + 1] - xi[k]) / (b.y[k + 1] - b.y[k]);
  return sl > slope && sr > slope;
}

namespace detail {

// Event M̄ >= y for one record: 1, 0, or undecided (-1).
inline int max_ge(const LevelRecord& r, double y, double eps) {
  if (r.point()) return r.max_lo >= y - eps ? 1 : 0;
  auto q = max_at_least(r, y);
  if (!q) return -1;
  if (*q >= 1.0) return 1;
  if (*q <= 0.0) return 0;
  return -1;
}

}  // namespace detail

namespace detail {

inline const char* const kRelationNames[] = {"impl5", "impl1", "impl2", "impl4", "impl3",
                                             "equivalence", "contributions"};

// Violation masses of every relation at one grid point and top level n.
struct RelationPoint {
  double v[6] = {0, 0, 0, 0, 0, 0};
  double identity = -1.0;  // |lhs - rhs| when the identity applies
  std::size_t undecided = 0;
  bool borderline = false;
};

inline RelationPoint relation_point(const PathEnsemble& e, const BoundarySet& b, int n,
                                    std::size_t k, const RelationOptions& ro) {
  RelationPoint out;
  const double y = b.y[k];
  const double xn = b.xi[n - 1][k];
  const int jn = b.j[n - 1][k];
  const double xj = jn > 0 ? b.xi[jn - 1][k] : -kInf;
  const bool incr = strictly_increasing_at(b, n, k, ro.increase_slope);
  out.borderline = !incr && k > 0 && k + 1 < b.size() &&
                   b.xi[n - 1][k + 1] > b.xi[n - 1][k - 1] + 1e-12 && !b.near_jump(n, y) &&
                   !b.near_jump(n, b.y[k + 1]);
  const double pe = ro.premise_eps, ce = ro.conclusion_eps;
  double tail_n = 0, above_n = 0, above_j = 0, tail_j = 0;
  bool ident_ok = true;
  for (const auto& p : e.paths) {
    const LevelRecord& rn = p.levels[n - 1];
    const int gn = max_ge(rn, y, pe);
    const int gj = jn > 0 ? max_ge(p.levels[jn - 1], y, pe) : 0;
    if (gn < 0 || gj < 0) {
      ++out.undecided;
      ident_ok = false;
      continue;
    }
    const double w = p.weight;
    // M_n > xi_n(y)  =>  M̄_n >= y
    if (rn.m > xn + pe && gn == 0) out.v[0] += w;
    tail_n += gn * w;
    if (rn.m >= xn - pe) above_n += w;
    if (jn > 0) {
      const LevelRecord& rj = p.levels[jn - 1];
      // M_j >= xi_n > xi_j  =>  M_n >= xi_n
      if (rj.m >= xn - pe && xn > xj + pe && rn.m < xn - ce) out.v[1] += w;
      // M̄_j < y <= M̄_n  =>  M_n >= xi_n
      if (gj == 0 && gn == 1 && rn.m < xn - ce) out.v[2] += w;
      // M̄_j >= y, M_j < xi_n  =>  M_n < xi_n
      if (gj == 1 && rj.m < xn - pe && rn.m >= xn + ce) out.v[3] += w;
      if (rj.m >= xn - pe) above_j += w;
      tail_j += gj * w;
    }
    if (incr) {
      // M_n >= xi_n  =>  M̄_n >= y
      if (rn.m >= xn - pe && gn == 0) out.v[4] += w;
      // and the converse when j = 0
      if (jn == 0 && gn == 1 && rn.m < xn - ce) out.v[5] += w;
    }
  }
  if (incr && ident_ok) {
    const double rhs = jn == 0 ? above_n : above_n - above_j + tail_j;
    out.identity = std::abs(tail_n - rhs);
  }
  return out;
}

inline CheckReport relation_report(const std::vector<std::pair<int, double>>& where,
                                   const std::vector<RelationPoint>& pts,
                                   const RelationOptions& ro) {
  CheckReport rep;
  for (const char* nm : kRelationNames) {
    Check c;
    c.name = nm;
    c.threshold = std::string(nm) == "contributions" ? ro.identity_tol : 0.0;
    rep.checks.push_back(c);
  }
  std::size_t undecided = 0, borderline = 0, identity_points = 0;
  for (std::size_t q = 0; q < pts.size(); ++q) {
    const auto& rp = pts[q];
    undecided += rp.undecided;
    borderline += rp.borderline ? 1 : 0;
    for (int c = 0; c < 6; ++c)
      if (rp.v[c] > 0.0)
        rep.checks[c].where.push_back({where[q].first, where[q].second, kRelationNames[c], rp.v[c]});
    if (rp.identity >= 0.0) {
      ++identity_points;
      Check& c = rep.checks[6];
      c.statistic = std::max(c.statistic, rp.identity);
      if (rp.identity > ro.identity_tol)
        c.where.push_back({where[q].first, where[q].second, "contributions", rp.identity});
    }
  }
  for (int c = 0; c < 6; ++c) {
    rep.checks[c].statistic = static_cast<double>(rep.checks[c].where.size());
    rep.checks[c].pass = rep.checks[c].where.empty();
  }
  rep.checks[6].pass = rep.checks[6].where.empty();
  rep.checks[6].note = "strictly increasing points: " + std::to_string(identity_points) +
                       "; borderline points skipped: " + std::to_string(borderline);
  rep.checks[0].note = "undecided records skipped: " + std::to_string(undecided);
  return rep;
}

}  // namespace detail

// Checks the pathwise implications between stop values and maxima, and the
// identity for P[M̄_n >= y] at strictly increasing points, for every level
// as the top level n. The ensemble must resolve M̄ >= y at each grid point
// (Monte Carlo ensembles always do).
inline CheckReport relation_check(const PathEnsemble& e, const BoundarySet& b,
                                  const std::vector<double>& grid = {},
                                  const RelationOptions& ro = {}) {
  const std::vector<double>& ys = grid.empty() ? b.y : grid;
  std::vector<std::pair<int, double>> where;
  std::vector<std::size_t> ks;
  for (int n = 1; n <= e.n_levels && n <= b.levels(); ++n)
    for (double y : ys) {
      const std::size_t k = b.find(y);
      if (k == static_cast<std::size_t>(-1)) continue;
      where.push_back({n, y});
      ks.push_back(k);
    }
  std::vector<detail::RelationPoint> pts(where.size());
  parallel_for(where.size(), [&](std::size_t q) {
    pts[q] = detail::relation_point(e, b, where[q].first, ks[q], ro);
  });
  return detail::relation_report(where, pts, ro);
}

// Exact version: the chain is rerun for every grid point with that point
// added to its thresholds, so every record resolves M̄ >= y exactly.
inline CheckReport relation_check_exact(const ExitProgram& prog, const BoundarySet& b,
                                        const std::vector<double>& grid = {},
                                        const RelationOptions& ro = {}) {
  const std::vector<double>& ys = grid.empty() ? b.y : grid;
  std::vector<double> yk;
  std::vector<std::size_t> ks;
  for (double y : ys) {
    const std::size_t k = b.find(y);
    if (k == static_cast<std::size_t>(-1)) continue;
    yk.push_back(y);
    ks.push_back(k);
  }
  const int n_levels = std::min<int>(static_cast<int>(prog.stages.size()), b.levels());
  std::vector<std::vector<detail::RelationPoint>> per(yk.size());
  parallel_for(yk.size(), [&](std::size_t q) {
    const PathEnsemble e = exact_laws_program(prog, 0.0, {yk[q]});
    for (int n = 1; n <= n_levels; ++n) per[q].push_back(detail::relation_point(e, b, n, ks[q], ro));
  });
  std::vector<std::pair<int, double>> where;
  std::vector<detail::RelationPoint> pts;
  for (int n = 1; n <= n_levels; ++n)
    for (std::size_t q = 0; q < yk.size(); ++q) {
      where.push_back({n, yk[q]});
      pts.push_back(per[q][n - 1]);
    }
  return detail::relation_report(where, pts, ro);
}

inline std::size_t relation_violations(const CheckReport& r) {
  std::size_t n = 0;
  for (const auto& c : r.checks) n += c.where.size();
  return n;
}

// ---------------------------------------------------------------------------
// Uniform integrability tail table

struct UiRow {
  double x = 0.0;
  double value = 0.0;     // x * P[max |B| >= x]
  double envelope = 0.0;  // x * (K_n(x) + P[min <= -x])
  bool within = true;
};

struct UiReport {
  std::vector<UiRow> rows;
  bool monotone_tail = true;  // advisory
  bool within_envelope = true;
};

inline UiReport ui_tail_check(const PathEnsemble& e, const BoundarySet& b,
                              const std::vector<double>& xs) {
  UiReport out;
  const int n = e.n_levels;
  for (double x : xs) {
    double pabs = 0.0, pmin = 0.0;
    for (const auto& p : e.paths) {
      const double mx = p.levels[n - 1].max_lo;
      const double mn = std::isnan(p.min_value) ? 0.0 : p.min_value;
      if (std::max(mx, -mn) >= x) pabs += p.weight;
      if (mn <= -x) pmin += p.weight;
    }
    UiRow r;
    r.x = x;
    r.value = x * pabs;
    // P[max >= x] is a closed tail, so take K just left of x.
    const double xl = x - 1e-6 * std::max(1.0, x);
    const double Kn = xl > 0 ? levels_at(b.seq, xl, b.opts, n).back().K : 1.0;
    r.envelope = x * (Kn + pmin);
    r.within = r.value <= r.envelope + 1e-12 + 3.0 * x / std::sqrt(std::max<double>(1, e.paths.size()));
    out.within_envelope = out.within_envelope && r.within;
    out.rows.push_back(r);
  }
  // Advisory: the last third of the table should not increase.
  const std::size_t start = out.rows.size() * 2 / 3;
  for (std::size_t q = start + 1; q < out.rows.size(); ++q)
    if (out.rows[q].value > out.rows[q - 1].value + 1e-12) out.monotone_tail = false;
  return out;
}

// ---------------------------------------------------------------------------
// Restriction diagnostic

struct RestrictionResult {
  double mass_diff = 0.0;
  double mean_diff = 0.0;
  double convex_order_violation = 0.0;
};

// lambda1 = mu_n on [alpha, beta); lambda2 = sum over pieces of mu_i on
// [cut_{i-1}, cut_i) with cut_0 = alpha and cut_m = beta, piece i taken from
// the i-th marginal. Atomic marginals only.
inline RestrictionResult restriction_diagnostic(const MarginalSequence& seq, double alpha,
                                                const std::vector<double>& cuts, double beta) {
  if (seq.empty()) throw InputError("restriction_diagnostic: empty sequence");
  if (alpha > beta) throw InputError("restriction_diagnostic: alpha > beta");
  std::vector<double> z = {alpha};
  for (double c : cuts) {
    if (c < z.back() || c > beta) throw InputError("restriction_diagnostic: cuts out of order");
    z.push_back(c);
  }
  z.push_back(beta);
  const std::size_t pieces = z.size() - 1;
  if (pieces > seq.size()) throw InputError("restriction_diagnostic: more pieces than marginals");

  std::vector<Atom> l1, l2;
  for (const Atom& a : seq.back().atoms())
    if (a.x >= alpha && a.x < beta) l1.push_back(a);
  for (std::size_t i = 0; i < pieces; ++i)
    for (const Atom& a : seq[i].atoms())
      if (a.x >= z[i] && a.x < z[i + 1]) l2.push_back(a);

  auto mass = [](const std::vector<Atom>& v) {
    double s = 0.0;
    for (const Atom& a : v) s += a.w;
    return s;
  };
  auto moment = [](const std::vector<Atom>& v) {
    double s = 0.0;
    for (const Atom& a : v) s += a.w * a.x;
    return s;
  };
  auto call = [](const std::vector<Atom>& v, double k) {
    double s = 0.0;
    for (const Atom& a : v) s += a.w * std::max(a.x - k, 0.0);
    return s;
  };
  RestrictionResult r;
  r.mass_diff = mass(l1) - mass(l2);
  r.mean_diff = moment(l1) - moment(l2);
  std::vector<double> probes = {alpha, beta};
  for (const Atom& a : l1) probes.push_back(a.x);
  for (const Atom& a : l2) probes.push_back(a.x);
  for (double k : probes) r.convex_order_violation = std::max(r.convex_order_violation, call(l2, k) - call(l1, k));
  return r;
}

}  // namespace iay
