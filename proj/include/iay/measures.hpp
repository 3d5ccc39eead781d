#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "iay/errors.hpp"

namespace iay {

inline constexpr double kMassTol = 1e-12;
inline constexpr double kMeanTol = 1e-9;
inline constexpr double kConvexOrderTol = 1e-9;

struct Atom {
  double x;
  double w;
};

// A centred law on the line. Atomic input is kept as is; a call-price curve
// is read as its piecewise-linear interpolant, i.e. an atomic law sitting on
// the kinks, and the original (strike, price) table is retained so that c()
// reproduces the given prices exactly.
class Marginal {
 public:
  Marginal() = default;

  static Marginal from_atoms(std::vector<Atom> atoms) {
    if (atoms.empty()) throw InputError("atomic marginal has no atoms");
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.x < b.x; });
    double mass = 0.0, first = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const Atom& a = atoms[i];
      if (!std::isfinite(a.x) || !std::isfinite(a.w))
        throw InputError("atom with non-finite position or weight");
      if (!(a.w > 0.0)) {
        std::ostringstream os;
        os << "atom at " << a.x << " has non-positive weight " << a.w;
        throw InputError(os.str());
      }
      if (i > 0 && !(a.x > atoms[i - 1].x)) {
        std::ostringstream os;
        os << "duplicate atom position " << a.x;
        throw InputError(os.str());
      }
      mass += a.w;
      first += a.x * a.w;
    }
    if (std::abs(mass - 1.0) > kMassTol) {
      std::ostringstream os;
      os.precision(17);
      os << (mass < 1.0 ? "mass deficit" : "mass excess")
         << ": weights sum to " << mass;
      throw InputError(os.str());
    }
    if (std::abs(first) > kMeanTol) {
      std::ostringstream os;
      os.precision(17);
      os << "marginal is not centred: mean " << first;
      throw InputError(os.str());
    }
    Marginal m;
    m.atoms_ = std::move(atoms);
    m.finish();
    return m;
  }

  static Marginal from_call_curve(std::vector<double> strikes,
                                  std::vector<double> prices) {
    const std::size_t n = strikes.size();
    if (n < 2 || prices.size() != n)
      throw InputError("call curve needs at least two (strike, price) pairs of equal length");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(strikes[i]) || !std::isfinite(prices[i]))
        throw InputError("call curve contains a non-finite entry");
      if (i > 0 && !(strikes[i] > strikes[i - 1]))
        throw InputError("call curve strikes must be strictly increasing");
      const double floor = std::max(-strikes[i], 0.0);
      if (prices[i] < floor - kMassTol) {
        std::ostringstream os;
        os.precision(17);
        os << "call price " << prices[i] << " at strike " << strikes[i]
           << " is below the intrinsic bound " << floor;
        throw InputError(os.str());
      }
    }
    std::vector<double> slope(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      slope[i] = (prices[i + 1] - prices[i]) / (strikes[i + 1] - strikes[i]);
      if (slope[i] > kMassTol) {
        std::ostringstream os;
        os.precision(17);
        os << "call curve increases between strikes " << strikes[i] << " and "
           << strikes[i + 1];
        throw InputError(os.str());
      }
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (slope[i] < slope[i - 1] - 1e-10) {
        std::ostringstream os;
        os.precision(17);
        os << "call curve is not convex at strikes (" << strikes[i - 1] << ", "
           << strikes[i] << ", " << strikes[i + 1] << ")";
        throw InputError(os.str());
      }
    }
    if (slope.front() < -1.0 - 1e-10)
      throw InputError("call curve falls faster than slope -1 at the first strike");
    if (std::abs(prices.back()) > kMassTol)
      throw InputError("call curve does not reach zero at the last strike");
    const double mean = prices.front() + strikes.front();
    if (std::abs(mean) > kMeanTol) {
      std::ostringstream os;
      os.precision(17);
      os << "call curve is not centred: price(s0)+s0 = " << mean;
      throw InputError(os.str());
    }

    // Implied atoms: slope increments at each kink.
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < n; ++i) {
      const double left = (i == 0) ? -1.0 : slope[i - 1];
      const double right = (i + 1 == n) ? 0.0 : slope[i];
      const double w = right - left;
      if (w > 1e-14) atoms.push_back({strikes[i], w});
    }
    double total = 0.0;
    for (const Atom& a : atoms) total += a.w;
    for (Atom& a : atoms) a.w /= total;

    Marginal m;
    m.atoms_ = std::move(atoms);
    m.strikes_ = std::move(strikes);
    m.prices_ = std::move(prices);
    m.prices_.back() = 0.0;
    m.finish();
    return m;
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  bool is_curve() const { return !strikes_.empty(); }
  const std::vector<double>& strikes() const { return strikes_; }
  const std::vector<double>& prices() const { return prices_; }
  double l() const { return atoms_.front().x; }
  double r() const { return atoms_.back().x; }
  std::size_t size() const { return atoms_.size(); }

  double mean() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.x * a.w;
    return s;
  }

  // c(k) = E[(X - k)^+].
  double call(double k) const {
    if (is_curve()) return curve_call(k);
    const std::size_t i = first_above(k);
    const std::size_t n = atoms_.size();
    if (n - i <= 64) {
      double s = 0.0;
      for (std::size_t q = i; q < n; ++q) s += (atoms_[q].x - k) * atoms_[q].w;
      return s;
    }
    return std::max(0.0, sfx_wx_[i] - k * sfx_w_[i]);
  }

  // P(X > k) and P(X >= k).
  double prob_above(double k) const { return sfx_w_[first_above(k)]; }
  double prob_at_or_above(double k) const { return sfx_w_[first_at_or_above(k)]; }

  // One-sided derivatives of the call function.
  double call_slope_left(double k) const { return -prob_at_or_above(k); }
  double call_slope_right(double k) const { return -prob_above(k); }

  // E[X; X >= k].
  double first_moment_at_or_above(double k) const {
    return sfx_wx_[first_at_or_above(k)];
  }

 private:
  void finish() {
    const std::size_t n = atoms_.size();
    sfx_w_.assign(n + 1, 0.0);
    sfx_wx_.assign(n + 1, 0.0);
    for (std::size_t q = n; q-- > 0;) {
      sfx_w_[q] = sfx_w_[q + 1] + atoms_[q].w;
      sfx_wx_[q] = sfx_wx_[q + 1] + atoms_[q].w * atoms_[q].x;
    }
  }

  std::size_t first_above(double k) const {
    auto it = std::upper_bound(atoms_.begin(), atoms_.end(), k,
                               [](double v, const Atom& a) { return v < a.x; });
    return static_cast<std::size_t>(it - atoms_.begin());
  }
  std::size_t first_at_or_above(double k) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), k,
                               [](const Atom& a, double v) { return a.x < v; });
    return static_cast<std::size_t>(it - atoms_.begin());
  }

  double curve_call(double k) const {
    if (k <= strikes_.front()) return prices_.front() + (strikes_.front() - k);
    if (k >= strikes_.back()) return 0.0;
    auto it = std::upper_bound(strikes_.begin(), strikes_.end(), k);
    const std::size_t hi = static_cast<std::size_t>(it - strikes_.begin());
    const std::size_t lo = hi - 1;
    const double t = (k - strikes_[lo]) / (strikes_[hi] - strikes_[lo]);
    return prices_[lo] + t * (prices_[hi] - prices_[lo]);
  }

  std::vector<Atom> atoms_;
  std::vector<double> sfx_w_, sfx_wx_;
  std::vector<double> strikes_, prices_;
};

using MarginalSequence = std::vector<Marginal>;

inline double call_price(const Marginal& m, double strike) { return m.call(strike); }

// Mean of the law restricted to [x, inf), or x itself once x passes r.
inline double barycentre(const Marginal& m, double x) {
  if (x >= m.r()) return x;
  const double mass = m.prob_at_or_above(x);
  if (!(mass > 0.0)) throw InputError("barycentre: zero tail mass below the right endpoint");
  return m.first_moment_at_or_above(x) / mass;
}

// sup argmin over z < y of c(z)/(y - z). Between atoms the ratio is monotone,
// so atoms are the only interior candidates; when the minimum is 0 (y >= r)
// the argmin runs up to y and the supremum is y itself.
inline double barycentre_inverse(const Marginal& m, double y, double tie_rel = 1e-10) {
  if (y >= m.r()) return y;
  double best = std::numeric_limits<double>::infinity();
  double arg = y;
  for (const Atom& a : m.atoms()) {
    if (!(a.x < y)) break;
    const double v = m.call(a.x) / (y - a.x);
    const double band = std::isfinite(best) ? tie_rel * std::abs(best) + 1e-300 : 0.0;
    if (v < best - band) {
      best = v;
      arg = a.x;
    } else if (v <= best + band) {
      arg = a.x;
      best = std::min(best, v);
    }
  }
  return arg;
}

// Potential U(x) = -E|X - x|.
inline double potential(const Marginal& m, double x) {
  double s = 0.0;
  for (const Atom& a : m.atoms()) s += std::abs(a.x - x) * a.w;
  return -s;
}

// Tail of the Hardy-Littlewood transform: the law of the maximum under the
// one-marginal Azema-Yor embedding.
inline double hl_tail(const Marginal& m, double y) {
  if (y <= 0.0) return 1.0;
  if (y >= m.r()) return 0.0;
  const double z = barycentre_inverse(m, y);
  return m.call(z) / (y - z);
}

struct ValidationReport {
  std::vector<double> mean_deviation;       // per marginal
  std::vector<double> max_order_violation;  // per pair (i-1, i), i >= 2
  std::vector<double> violation_at;         // strike where it peaks
  bool means_ok = true;
  bool order_ok = true;
  bool pass() const { return means_ok && order_ok; }
};

// The difference of two piecewise-linear call functions is piecewise linear
// with kinks at the union of atoms and vanishes at both ends, so checking the
// union of atom positions is exact.
inline ValidationReport validate_sequence(const MarginalSequence& seq) {
  if (seq.empty()) throw InputError("empty marginal sequence");
  ValidationReport rep;
  std::vector<double> grid;
  for (const Marginal& m : seq)
    for (const Atom& a : m.atoms()) grid.push_back(a.x);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  for (const Marginal& m : seq) {
    const double dev = std::abs(m.mean());
    rep.mean_deviation.push_back(dev);
    if (dev > kMeanTol) rep.means_ok = false;
  }
  for (std::size_t i = 1; i < seq.size(); ++i) {
    double worst = 0.0, where = grid.front();
    for (double z : grid) {
      const double d = seq[i - 1].call(z) - seq[i].call(z);
      if (d > worst) {
        worst = d;
        where = z;
      }
    }
    rep.max_order_violation.push_back(worst);
    rep.violation_at.push_back(where);
    if (worst > kConvexOrderTol) rep.order_ok = false;
  }
  return rep;
}

// Every atom position of every marginal, sorted and unique.
inline std::vector<double> all_atom_positions(const MarginalSequence& seq) {
  std::vector<double> xs;
  for (const Marginal& m : seq)
    for (const Atom& a : m.atoms()) xs.push_back(a.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

inline Marginal dirac0() { return Marginal::from_atoms({{0.0, 1.0}}); }

inline Marginal symmetric_pair(double k) {
  return Marginal::from_atoms({{-k, 0.5}, {k, 0.5}});
}

}  // namespace iay
