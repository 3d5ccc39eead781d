#include <gtest/gtest.h>

#include <cmath>

#include "iay/measures.hpp"

using namespace iay;

TEST(Measures, CallPriceOfPair) {
  const Marginal m = symmetric_pair(1);
  EXPECT_DOUBLE_EQ(m.call(-2.0), 2.0);
  EXPECT_DOUBLE_EQ(m.call(0.0), 0.5);
  EXPECT_DOUBLE_EQ(m.call(1.0), 0.0);
  EXPECT_DOUBLE_EQ(m.call_slope_left(1.0), -0.5);
  EXPECT_DOUBLE_EQ(m.call_slope_right(1.0), 0.0);
}

TEST(Measures, RejectsMassDeficit) {
  try {
    Marginal::from_atoms({{-1.0, 0.45}, {1.0, 0.45}});
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("mass deficit"), std::string::npos) << e.what();
  }
}

TEST(Measures, RejectsUncentred) {
  EXPECT_THROW(Marginal::from_atoms({{-1.0, 0.5}, {2.0, 0.5}}), InputError);
}

TEST(Measures, CurveConvexityErrorNamesStrikes) {
  try {
    Marginal::from_call_curve({-1.0, 0.0, 0.5, 1.0}, {1.0, 0.5, 0.3, 0.0});
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("not convex"), std::string::npos) << e.what();
  }
}

TEST(Measures, CurveImpliesAtoms) {
  const Marginal m = Marginal::from_call_curve({-1.0, 0.0, 1.0}, {1.0, 0.5, 0.0});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m.atoms()[0].w, 0.5, 1e-15);
  EXPECT_NEAR(m.call(0.25), 0.375, 1e-15);
  EXPECT_TRUE(m.is_curve());
}

TEST(Measures, BarycentreAndInverse) {
  const Marginal m = symmetric_pair(1);
  EXPECT_DOUBLE_EQ(barycentre(m, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(barycentre(m, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(barycentre_inverse(m, 0.5), -1.0);
}

TEST(Measures, HardyLittlewoodTailOfPair) {
  const Marginal m = symmetric_pair(1);
  for (double y : {0.0, 0.25, 0.5, 0.9}) EXPECT_NEAR(hl_tail(m, y), 1.0 / (1.0 + y), 1e-14);
}

TEST(Measures, PotentialIsMinusAbsoluteMoment) {
  const Marginal m = symmetric_pair(2);
  EXPECT_DOUBLE_EQ(potential(m, 0.0), -2.0);
  EXPECT_DOUBLE_EQ(potential(m, 3.0), -3.0);
}

TEST(Measures, ConvexOrderValidation) {
  EXPECT_TRUE(validate_sequence({symmetric_pair(1), symmetric_pair(2)}).pass());
  const ValidationReport v = validate_sequence({symmetric_pair(2), symmetric_pair(1)});
  EXPECT_FALSE(v.order_ok);
  EXPECT_GT(v.max_order_violation[0], 0.4);
}

TEST(Measures, DiracIsSmallestInOrder) {
  EXPECT_TRUE(validate_sequence({dirac0(), symmetric_pair(1)}).pass());
}
