#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace iay {

// Where one stage left the path: stop value, and the running maximum either
// as an exact number (lo == hi) or as a cell [lo, hi). For cells the record
// may carry the law of the maximum inside the cell: the path entered the
// cell from the point lo, then ran from x0 until absorbed at v before hi.
struct LevelRecord {
  double m = 0.0;
  double max_lo = 0.0;
  double max_hi = 0.0;
  double x0 = std::numeric_limits<double>::quiet_NaN();
  double v = std::numeric_limits<double>::quiet_NaN();

  bool point() const { return max_lo == max_hi; }
  bool has_cell_law() const { return !point() && !std::isnan(v); }
};

struct PathRecord {
  double weight = 0.0;
  std::vector<LevelRecord> levels;
  double min_value = std::numeric_limits<double>::quiet_NaN();  // over [0, tau_n]
};

struct EnsembleMeta {
  bool exact = false;
  std::uint64_t n_paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t truncated = 0;
  bool exact_exit = false;
  bool history = true;  // false: records only carry per-level marginal laws
};

struct PathEnsemble {
  int n_levels = 0;
  std::vector<PathRecord> paths;
  EnsembleMeta meta;

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : paths) s += p.weight;
    return s;
  }
};

inline constexpr double kRecordEps = 1e-12;

// P[max >= y | record], or nullopt when the record cannot decide.
inline std::optional<double> max_at_least(const LevelRecord& r, double y) {
  if (r.max_lo >= y - kRecordEps) return 1.0;
  if (r.point()) return 0.0;
  if (r.max_hi <= y + kRecordEps) return 0.0;
  if (!r.has_cell_law()) return std::nullopt;
  // Run from x0 absorbed at v before hi: P[sup >= y | absorbed at v].
  const double t = r.max_hi;
  return (r.x0 - r.v) * (t - y) / ((y - r.v) * (t - r.x0));
}

// P[max > y | record]; equals max_at_least except for a point exactly at y.
inline std::optional<double> max_above(const LevelRecord& r, double y) {
  if (r.point()) return r.max_lo > y + kRecordEps ? 1.0 : 0.0;
  return max_at_least(r, y);
}

// Exact conditional mean of the maximum inside its cell.
inline std::optional<double> max_mean(const LevelRecord& r) {
  if (r.point()) return r.max_lo;
  if (!r.has_cell_law()) return std::nullopt;
  const double a = r.max_lo, t = r.max_hi, x0 = r.x0, v = r.v;
  // E = a + int_a^t P[sup >= z] dz with P = (x0-v)(t-z)/((z-v)(t-x0)).
  const double c = (x0 - v) / (t - x0);
  const double integral = (t - v) * std::log((t - v) / (a - v)) - (t - a);
  return a + c * integral;
}

// P[M̄_level >= y]; nullopt if some record with positive weight is undecided.
inline std::optional<double> tail_max(const PathEnsemble& e, int level, double y) {
  double s = 0.0;
  for (const auto& p : e.paths) {
    auto q = max_at_least(p.levels[level - 1], y);
    if (!q) return std::nullopt;
    s += p.weight * *q;
  }
  return s;
}

// Law of M_level as value -> mass, merging values within tol.
inline std::map<double, double> value_law(const PathEnsemble& e, int level, double tol = 1e-9) {
  std::map<double, double> raw;
  for (const auto& p : e.paths) raw[p.levels[level - 1].m] += p.weight;
  std::map<double, double> out;
  for (const auto& [x, w] : raw) {
    if (!out.empty() && x - std::prev(out.end())->first <= tol)
      std::prev(out.end())->second += w;
    else
      out[x] = w;
  }
  return out;
}

inline double mass_near(const PathEnsemble& e, int level, double x, double tol = 1e-9) {
  double s = 0.0;
  for (const auto& p : e.paths)
    if (std::abs(p.levels[level - 1].m - x) <= tol) s += p.weight;
  return s;
}

}  // namespace iay
