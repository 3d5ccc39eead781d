#include <gtest/gtest.h>

#include <cmath>

#include "iay/oracle.hpp"
#include "iay/verify.hpp"

using namespace iay;

TEST(Oracle, GamblersRuin) {
  EXPECT_DOUBLE_EQ(exit_prob(0.0, -1.0, 1.0), 0.5);
  // Probability of leaving through the lower barrier.
  EXPECT_DOUBLE_EQ(exit_prob(0.0, -1.0, 3.0), 0.75);
}

TEST(Oracle, PairLawAndMaxTail) {
  const MarginalSequence seq = {symmetric_pair(1)};
  const std::vector<double> ys = {0.25, 0.5, 0.75};
  const auto laws = exact_level_laws_boundaries(seq, {}, ys);
  ASSERT_EQ(laws.size(), 1u);
  EXPECT_NEAR(laws[0].mass_near(-1.0), 0.5, 1e-15);
  EXPECT_NEAR(laws[0].mass_near(1.0), 0.5, 1e-15);
  for (double y : ys) {
    const auto t = laws[0].tail(y);
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(*t, 1.0 / (1.0 + y), 1e-14);
  }
  EXPECT_NEAR(*mean_max(laws[0]), std::log(2.0), 1e-14);
}

TEST(Oracle, StepExtractionSnapsToAtoms) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  const auto steps = level_steps(seq);
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].value(0.5), -1.0);
  EXPECT_EQ(steps[1].value(0.5), -2.0);
  EXPECT_EQ(steps[1].value(1.5), -2.0);
  EXPECT_FALSE(steps[1].jump_points().empty());
}

TEST(Oracle, ImrvEmbedsEveryMarginal) {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2), symmetric_pair(3)};
  const auto laws = exact_level_laws_boundaries(seq);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const LawComparison c = compare_law(laws[i], seq[i]);
    ASSERT_TRUE(c.tv.has_value());
    EXPECT_LE(*c.tv, 1e-12);
  }
}

TEST(Oracle, ProgramWithIntervalRule) {
  // Exit (-1, 2) from 0, then exit (-3, 3) from wherever stage one stopped.
  ExitProgram p;
  p.stages.resize(2);
  p.stages[0].steps.push_back(IntervalRule{-1.0, 2.0});
  p.stages[1].steps.push_back(IntervalRule{-3.0, 3.0});
  const auto laws = exact_level_laws_program(p);
  EXPECT_NEAR(laws[0].mass_near(-1.0), 2.0 / 3.0, 1e-15);
  // From -1: P[hit 3] = 1/3; from 2: P[hit 3] = 5/6.
  EXPECT_NEAR(laws[1].mass_near(3.0), 2.0 / 3.0 * 1.0 / 3.0 + 1.0 / 3.0 * 5.0 / 6.0, 1e-15);
}

TEST(Oracle, RejectsCurves) {
  const MarginalSequence seq = {Marginal::from_call_curve({-1.0, 0.0, 1.0}, {1.0, 0.5, 0.0})};
  EXPECT_THROW(exact_level_laws_boundaries(seq), InputError);
}
