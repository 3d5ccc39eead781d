#include <gtest/gtest.h>

#include <cmath>

#include "iay/extension_n3.hpp"

using namespace iay;

namespace {

struct Fixture {
  MarginalSequence seq = counterexample_measures();
  SearchOptions so;
  BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05), so);
  std::vector<JumpWindow> ws = jump_windows(b);
  JointLaw12 j = joint_law_exact(tau_prime_program(seq, ws, so));
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(ExtensionN3, CounterexampleSuite) {
  const CounterexampleReport r = counterexample_suite();
  EXPECT_NEAR(r.naive_m2_mass_at_minus1, 1.0 / 3.0, 1e-12);
  EXPECT_LE(r.program_level3_tv, 1e-12);
  EXPECT_EQ(r.naive_xi3_value, -3.0);
  ASSERT_EQ(r.naive_xi3_window.size(), 2u);
  EXPECT_NEAR(r.naive_xi3_window[0], 0.5, 1e-12);
}

TEST(ExtensionN3, WindowAroundXi2Jump) {
  ASSERT_EQ(fx().ws.size(), 1u);
  const JumpWindow& w = fx().ws[0];
  EXPECT_NEAR(w.y_lo, 0.5, 1e-9);
  EXPECT_NEAR(w.y_hi, 2.0, 1e-9);
  EXPECT_NEAR(w.z_lo, -3.0, 1e-12);
  EXPECT_NEAR(w.z_hi, 0.5, 1e-12);
  EXPECT_TRUE(in_window(fx().ws, -1.0, 1.0));
  EXPECT_FALSE(in_window(fx().ws, -1.0, 0.25));
}

TEST(ExtensionN3, JointLawIsAProbability) {
  EXPECT_NEAR(fx().j.total(), 1.0, 1e-14);
}

TEST(ExtensionN3, AuxiliaryTermValues) {
  EXPECT_NEAR(f_iAY(fx().j, -1.0, 1.0), 1.0 / 7.0, 1e-14);
  EXPECT_NEAR(f_iAY_dzeta(fx().j, -2.0, 1.0), 1.0 / 14.0, 1e-14);
  EXPECT_NEAR(f_iAY(fx().j, -3.0, 1.0), 0.0, 1e-14);
}

TEST(ExtensionN3, CorrectedBoundaryClosedForm) {
  const Fixture& f = fx();
  const CorrectedBoundary cb = corrected_boundary(f.seq, f.j, f.ws, f.b.y, f.so);
  std::size_t active = 0;
  for (std::size_t k = 0; k < cb.y.size(); ++k) {
    if (!cb.active[k]) continue;
    ++active;
    const double y = cb.y[k];
    EXPECT_EQ(cb.xi3[k], -2.0) << y;
    EXPECT_NEAR(cb.K3[k], (14.0 + 17.0 * y) / (7.0 * (1.0 + y) * (2.0 + y)), 1e-12) << y;
  }
  EXPECT_GT(active, 0u);
  EXPECT_FALSE(cb.non_monotone);
}

TEST(ExtensionN3, VerificationPasses) {
  const Fixture& f = fx();
  const CorrectedBoundary cb = corrected_boundary(f.seq, f.j, f.ws, f.b.y, f.so);
  const CheckReport r = verify_corrected(cb, f.seq, f.j, f.so);
  for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.statistic;
  ASSERT_NE(r.find("law_m3"), nullptr);
  EXPECT_LE(r.find("law_m3")->statistic, 1e-12);
}

TEST(ExtensionN3, NoWindowsWithoutJumps) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2), symmetric_pair(3)};
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, 0.05));
  EXPECT_TRUE(jump_windows(b).empty());
}
