#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "iay/mc_engine.hpp"
#include "iay/verify.hpp"

using namespace iay;

namespace {
BoundarySet pair_boundaries() {
  const MarginalSequence seq = {symmetric_pair(1), symmetric_pair(2)};
  return compute_boundaries(seq, build_y_grid(seq, 0.05));
}
}  // namespace

TEST(Rng, StreamsAreCounterBased) {
  PathStream a(7, 3), b(7, 3), c(7, 4);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_GT(x, 0.0);
  EXPECT_LE(x, 1.0);
}

TEST(McEngine, ExactExitMatchesMarginals) {
  const BoundarySet b = pair_boundaries();
  SimOptions o;
  o.n_paths = 40000;
  o.seed = 11;
  const PathEnsemble e = simulate(b, o);
  EXPECT_TRUE(e.meta.exact_exit);
  EXPECT_EQ(e.paths.size(), o.n_paths);
  for (int i = 1; i <= 2; ++i) {
    const double k = i;
    const double p = mass_near(e, i, k);
    EXPECT_NEAR(p, 0.5, 3.0 * std::sqrt(0.25 / o.n_paths) + 1e-12);
  }
}

TEST(McEngine, DeterministicAcrossThreadCounts) {
  const BoundarySet b = pair_boundaries();
  SimOptions o;
  o.n_paths = 5000;
  o.seed = 5;
  o.threads = 1;
  const PathEnsemble one = simulate(b, o);
  o.threads = 4;
  const PathEnsemble four = simulate(b, o);
  ASSERT_EQ(one.paths.size(), four.paths.size());
  for (std::size_t p = 0; p < one.paths.size(); ++p)
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(one.paths[p].levels[i].m, four.paths[p].levels[i].m);
      EXPECT_EQ(one.paths[p].levels[i].max_lo, four.paths[p].levels[i].max_lo);
    }
}

TEST(McEngine, SteppingIsCloseToTarget) {
  const BoundarySet b = pair_boundaries();
  SimOptions o;
  o.n_paths = 4000;
  o.seed = 9;
  o.exact_exit = false;
  o.dt = 1e-3;
  const PathEnsemble e = simulate(b, o);
  EXPECT_FALSE(e.meta.exact_exit);
  // Overshoot below the boundary is O(sqrt(dt)).
  for (const auto& p : e.paths) {
    EXPECT_LE(p.levels[0].m, 1.0 + 0.3);
    EXPECT_GE(p.levels[0].m, -1.0 - 0.3);
    EXPECT_GE(p.levels[1].max_lo, p.levels[0].max_lo);
  }
  const double tail = *tail_max(e, 1, 0.5);
  EXPECT_NEAR(tail, 1.0 / 1.5, 0.05);
}

TEST(McEngine, TruncationIsReported) {
  const BoundarySet b = pair_boundaries();
  SimOptions o;
  o.n_paths = 200;
  o.exact_exit = false;
  o.dt = 1e-4;
  o.max_steps = 3;
  EXPECT_THROW(simulate(b, o), SimulationFailure);
}

TEST(McEngine, ThreadCountFromEnvironment) {
  setenv("IAY_THREADS", "3", 1);
  EXPECT_EQ(thread_count(), 3u);
  unsetenv("IAY_THREADS");
  EXPECT_GE(thread_count(), 1u);
}
