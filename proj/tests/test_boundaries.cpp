#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "iay/boundaries.hpp"

using namespace iay;

namespace {
MarginalSequence counterexample() {
  return {Marginal::from_atoms({{-1.0, 2.0 / 3.0}, {2.0, 1.0 / 3.0}}),
          Marginal::from_atoms({{-3.0, 2.0 / 7.0}, {0.5, 18.0 / 35.0}, {3.0, 1.0 / 5.0}}),
          Marginal::from_atoms({{-3.0, 2.0 / 7.0}, {-2.0, 9.0 / 35.0}, {3.0, 16.0 / 35.0}})};
}
}  // namespace

TEST(Boundaries, AzemaYorPair) {
  const MarginalSequence seq = {symmetric_pair(1)};
  for (double y : {0.0, 0.3, 0.7, 0.99}) {
    const LevelPoint p = levels_at(seq, y)[0];
    EXPECT_EQ(p.xi, -1.0);
    EXPECT_NEAR(p.K, 1.0 / (1.0 + y), 1e-14);
    EXPECT_EQ(p.j, 0);
  }
  const LevelPoint top = levels_at(seq, 1.5)[0];
  EXPECT_EQ(top.xi, 1.5);
  EXPECT_EQ(top.K, 0.0);
}

TEST(Boundaries, ImrvMatchesSingleMarginalConstruction) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  for (double y : {0.2, 0.8, 1.5}) {
    const auto lv = levels_at(seq, y);
    EXPECT_EQ(lv[1].xi, barycentre_inverse(seq[1], y));
    EXPECT_NEAR(lv[1].K, hl_tail(seq[1], y), 1e-12);
  }
}

TEST(Boundaries, CounterexampleLevels) {
  const MarginalSequence seq = counterexample();
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05));
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (b.y[k] < 2.0) {
      EXPECT_EQ(b.xi[0][k], -1.0) << b.y[k];
    }
    if (b.y[k] < 0.5) {
      EXPECT_EQ(b.xi[1][k], -3.0) << b.y[k];
    } else if (b.y[k] < 3.0) {
      EXPECT_EQ(b.xi[1][k], 0.5) << b.y[k];
    }
  }
  EXPECT_FALSE(b.jumps[1].empty());
  EXPECT_NEAR(b.jumps[1].front(), 0.5, 1e-12);
}

TEST(Boundaries, GridContainsBarycentres) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  const auto g = build_y_grid(seq, 0.3);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_TRUE(std::binary_search(g.begin(), g.end(), 1.0));
  EXPECT_TRUE(std::binary_search(g.begin(), g.end(), 2.0));
  EXPECT_GE(g.back(), 2.0);
}

TEST(Boundaries, SupArgminTakesLargestTie) {
  std::vector<Candidate> c = {{-1.0, 0.5}, {0.0, 0.5 + 1e-13}, {0.5, 0.7}};
  EXPECT_EQ(sup_argmin(c, 1e-10), 1u);
}

TEST(Boundaries, DiagnosticsPassOnImrv) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2), symmetric_pair(3)};
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05));
  EXPECT_TRUE(assumption_diagnostics(b).pass());
}

TEST(Boundaries, DiagnosticsFlagCounterexample) {
  const MarginalSequence seq = counterexample();
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05));
  const DiagnosticsReport d = assumption_diagnostics(b);
  EXPECT_FALSE(d.pass());
}

TEST(Boundaries, DiagnosticsFlagTouchingCalls) {
  const MarginalSequence seq = {
      Marginal::from_atoms({{-2.25, 0.25}, {0.75, 0.75}}),
      Marginal::from_atoms({{-3.0, 2.0 / 11.0}, {-0.25, 0.25 / 0.44}, {2.75, 0.25}})};
  ASSERT_TRUE(validate_sequence(seq).pass());
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05));
  const DiagnosticsReport d = assumption_diagnostics(b);
  bool reason_b = false;
  for (const auto& f : d.flags) reason_b = reason_b || f.reason == 'b';
  EXPECT_TRUE(reason_b);
}

TEST(Boundaries, OdeResidualVanishesForPair) {
  const MarginalSequence seq = {symmetric_pair(1)};
  const BoundarySet b = compute_boundaries(seq, uniform_grid(0.0, 0.9, 91));
  const OdeReport r = ode_residual(b);
  EXPECT_FALSE(r.ode.empty());
  // K = 1/(1+y) is smooth: central differences leave O(h^2).
  EXPECT_LT(r.max_ode(), 1e-3);
}

TEST(Boundaries, IsotonicFixWarns) {
  const MarginalSequence seq = {symmetric_pair(1)};
  BoundarySet b = compute_boundaries(seq, uniform_grid(0.0, 0.5, 6));
  b.xi[0][3] = -2.0;
  std::ostringstream warn;
  isotonic_fix(b, warn);
  EXPECT_FALSE(warn.str().empty());
  for (std::size_t k = 1; k < b.size(); ++k) EXPECT_LE(b.xi[0][k - 1], b.xi[0][k]);
}
