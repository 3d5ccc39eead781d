// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "iay/iay.hpp"

using namespace iay;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

MarginalSequence pair_seq() { return {symmetric_pair(1)}; }
MarginalSequence imrv_seq() { return {symmetric_pair(1), symmetric_pair(2), symmetric_pair(3)}; }

// Density 1/6 on [-2, 0) and 2/3 on [0, 1], scaled by s, as a call curve.
Marginal kinked_curve(double s, int strikes) {
  auto c = [](double k) {
    if (k <= -2.0) return -k;
    if (k <= 0.0) return 1.0 / 3.0 - 2.0 * k / 3.0 + k * k / 12.0;
    if (k <= 1.0) return (1.0 - k) * (1.0 - k) / 3.0;
    return 0.0;
  };
  std::vector<double> S, P;
  for (int i = 0; i < strikes; ++i) {
    const double k = s * (-2.0 + 3.0 * i / (strikes - 1));
    S.push_back(k);
    P.push_back(s * c(k / s));
  }
  P.back() = 0.0;
  return Marginal::from_call_curve(S, P);
}

MarginalSequence curve_seq() { return {kinked_curve(1, 6001), kinked_curve(2, 6001)}; }

ExitProgram program_for(const MarginalSequence& seq) {
  return program_from_steps(level_steps(seq));
}

Outcome criterion1() {
  const auto seq = pair_seq();
  const BoundarySet b = compute_boundaries(seq, uniform_grid(0.0, 0.999, 1000));
  double err = 0.0;
  bool flat = true;
  for (std::size_t k = 0; k < b.size(); ++k) {
    err = std::max(err, std::abs(b.K[0][k] - 1.0 / (1.0 + b.y[k])));
    flat = flat && b.xi[0][k] == -1.0;
  }
  return {err <= 1e-8 && flat, "max |K_1 - 1/(1+y)| = " + num(err) + (flat ? ", xi_1 = -1" : ", xi_1 not -1")};
}

Outcome criterion2() {
  const auto seq = imrv_seq();
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01));
  double kerr = 0.0;
  std::size_t off = 0;
  for (int i = 1; i <= 3; ++i) {
    const Marginal& m = seq[i - 1];
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double y = b.y[k];
      if (y >= m.r()) continue;
      kerr = std::max(kerr, std::abs(b.K[i - 1][k] - hl_tail(m, y)));
      bool ok = false;
      for (std::size_t q = (k == 0 ? 0 : k - 1); q <= std::min(k + 1, b.size() - 1); ++q)
        if (std::abs(b.xi[i - 1][k] - barycentre_inverse(m, b.y[q])) <= 1e-9) ok = true;
      if (!ok) ++off;
    }
  }
  return {kerr <= 1e-8 && off == 0,
          "max |K_i - HL tail| = " + num(kerr) + ", xi_i off b_i^-1 by more than a cell at " +
              std::to_string(off) + " points"};
}

Outcome criterion3() {
  const auto seq = counterexample_measures();
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01));
  std::size_t bad = 0, window = 0;
  bool window_open = true;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double y = b.y[k];
    if (y < 2.0 && b.xi[0][k] != -1.0) ++bad;
    if (y < 0.5 && b.xi[1][k] != -3.0) ++bad;
    if (y >= 0.5 && y < 3.0 && b.xi[1][k] != 0.5) ++bad;
    if (y > 0.5 && window_open) {
      if (b.xi[2][k] == -3.0)
        ++window;
      else
        window_open = false;
    }
  }
  return {bad == 0 && window > 0,
          std::to_string(bad) + " off-value points for xi_1, xi_2; xi_3 = -3 on " +
              std::to_string(window) + " grid points above 1/2"};
}

Outcome criterion4() {
  const CounterexampleReport r = counterexample_suite();
  const bool m2 = std::abs(r.naive_m2_mass_at_minus1 - 1.0 / 3.0) <= 1e-12;
  const bool m3 = r.naive_m3_mass_at_minus3 > 2.0 / 7.0 + 1e-6;
  const bool prog = r.program_level3_tv <= 1e-12;
  std::string d = "P[M_2=-1] = " + num(r.naive_m2_mass_at_minus1) + (m2 ? " ok" : " off") +
                  "; P[M_3=-3] = " + fmt17(r.naive_m3_mass_at_minus3) +
                  (m3 ? " exceeds 2/7" : " does not exceed 2/7 + 1e-6") +
                  "; program tv = " + num(r.program_level3_tv);
  return {m2 && m3 && prog, d};
}

Outcome criterion5() {
  const auto seq = counterexample_measures();
  const SearchOptions so;
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01), so);
  const auto ws = jump_windows(b);
  const JointLaw12 j = joint_law_exact(tau_prime_program(seq, ws, so));
  const CorrectedBoundary cb = corrected_boundary(seq, j, ws, b.y, so);
  std::size_t active = 0, off = 0;
  for (std::size_t k = 0; k < cb.y.size(); ++k) {
    if (!cb.active[k]) continue;
    ++active;
    if (cb.xi3[k] != -2.0) ++off;
  }
  const CheckReport rep = verify_corrected(cb, seq, j, so);
  const Check* law = rep.find("law_m3");
  const Check* tail = rep.find("K3_tilde_vs_tail");
  const bool ok = active > 0 && off == 0 && law && law->pass && law->statistic <= 1e-12 && tail &&
                  tail->pass && tail->statistic <= 1e-10;
  return {ok, std::to_string(active) + " active points, " + std::to_string(off) +
                  " with xi~3 != -2; tv = " + (law ? num(law->statistic) : "missing") +
                  ", tail dev = " + (tail ? num(tail->statistic) : "missing")};
}

Outcome criterion6() {
  const double N = 2e5;
  SimOptions o;
  o.n_paths = static_cast<std::uint64_t>(N);
  o.seed = 20240601;
  o.exact_exit = true;
  const std::vector<std::pair<std::string, MarginalSequence>> cases = {
      {"pair", pair_seq()}, {"imrv", imrv_seq()}, {"counterexample", counterexample_measures()}};
  bool ok = true;
  std::string d;
  for (const auto& [name, seq] : cases) {
    const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01));
    const auto oracle = exact_level_laws_program(program_for(seq));
    const auto mc = level_laws(simulate(b, o));
    double z = 0.0, dev = 0.0;
    for (int i = 1; i <= b.levels(); ++i) {
      const MassComparison m = compare_masses(mc[i - 1], oracle[i - 1], N, 3.0);
      ok = ok && m.pass;
      z = std::max(z, m.max_z);
      dev = std::max(dev, max_law_check(mc[i - 1], b, i).sup_dev);
    }
    ok = ok && dev <= 0.01;
    d += name + ": max z " + num(z) + ", tail dev " + num(dev) + "; ";
  }
  return {ok, d};
}

Outcome criterion7() {
  const auto seq = curve_seq();
  std::vector<double> ode;
  double foc = 0.0;
  for (std::size_t pts : {191u, 381u, 761u}) {
    const BoundarySet b = compute_boundaries(seq, uniform_grid(0.0, 1.9, pts));
    const OdeReport r = ode_residual(b);
    ode.push_back(r.max_ode());
    foc = std::max(foc, r.max_foc());
  }
  const double r1 = ode[1] / ode[0], r2 = ode[2] / ode[1];
  const bool ok = r1 >= 0.4 && r1 <= 0.6 && r2 >= 0.4 && r2 <= 0.6 && foc <= 1e-6;
  return {ok, "ODE residual " + num(ode[0]) + " -> " + num(ode[1]) + " -> " + num(ode[2]) +
                  " (ratios " + num(r1) + ", " + num(r2) + "), first-order residual " + num(foc)};
}

Outcome criterion8() {
  bool ok = true;
  std::string d;
  double worst = 0.0;
  const std::vector<MarginalSequence> seqs = {pair_seq(), imrv_seq(), counterexample_measures(),
                                              {dirac0(), symmetric_pair(1)}, curve_seq()};
  for (const auto& seq : seqs) {
    const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01));
    try {
      for (const auto& r : barrier_table(b, b.y)) worst = std::max(worst, r.residual);
    } catch (const IdentityMismatch& e) {
      ok = false;
      d += std::string("identity mismatch: ") + e.what() + "; ";
    }
  }
  ok = ok && worst <= 1e-10;
  d += "telescoping residual " + num(worst);

  const auto pair = pair_seq();
  const BoundarySet b = compute_boundaries(pair, build_y_grid(pair, 0.01));
  const double lb = lookback_bound(b, identity_payoff(1.0, 100001));
  const auto laws = exact_level_laws_program(program_for(pair));
  const double em = mean_max(laws[0]).value_or(NAN);
  const bool l1 = std::abs(lb - std::log(2.0)) <= 1e-6;
  const bool l2 = std::abs(lb - em) <= 1e-10;
  ok = ok && l1 && l2;
  d += "; lookback " + std::to_string(lb) + " vs ln 2 off " + num(std::abs(lb - std::log(2.0))) +
       ", vs oracle E[max] off " + num(std::abs(lb - em));

  double slack = INFINITY;
  for (const auto& seq : {pair_seq(), imrv_seq()}) {
    const BoundarySet bs = compute_boundaries(seq, build_y_grid(seq, 0.01));
    double hi = 0.0;
    for (const Marginal& m : seq) hi = std::max(hi, m.r());
    const SuperhedgeResult sh = superhedge_check_exact(program_for(seq), bs, identity_payoff(hi, 2001));
    slack = std::min(slack, sh.min_slack);
    ok = ok && sh.undecided == 0;
  }
  ok = ok && slack >= -1e-12;
  d += "; superhedge min slack " + num(slack);
  return {ok, d};
}

Outcome criterion9() {
  const std::vector<std::pair<std::string, MarginalSequence>> cases = {
      {"pair", pair_seq()},
      {"imrv2", {symmetric_pair(1), symmetric_pair(2)}},
      {"imrv3", imrv_seq()},
      {"delta0", {dirac0(), symmetric_pair(1), symmetric_pair(2)}},
      {"counterexample", counterexample_measures()}};
  bool ok = true;
  std::string d;
  for (const auto& [name, seq] : cases) {
    const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.01));
    if (!assumption_diagnostics(b).pass()) {
      d += name + ": skipped (assumption flagged); ";
      continue;
    }
    const std::size_t v = relation_violations(relation_check_exact(program_for(seq), b));
    ok = ok && v == 0;
    d += name + ": " + std::to_string(v) + " violations; ";
  }
  return {ok, d};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    Outcome o;
    try {
      o = criteria[c]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", c + 1, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
