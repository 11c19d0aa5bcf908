#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mwr/errors.hpp"
#include "mwr/linalg.hpp"
#include "mwr/rng.hpp"
#include "oracle.hpp"

using namespace mwr;

TEST(Dot, SmallVectors) { EXPECT_DOUBLE_EQ(dot(RealVector{1, 2}, RealVector{3, 4}), 11.0); }

TEST(Dot, ZerosAnnihilate) {
  Rng rng(3);
  const RealVector v = sample_uniform(rng, -5, 5, 17);
  EXPECT_EQ(dot(zeros(17), v), 0.0);
}

TEST(Dot, MatchesSummationOracle) {
  Rng rng(11);
  const RealVector a = sample_uniform(rng, -1, 1, 100);
  const RealVector b = sample_uniform(rng, -1, 1, 100);
  EXPECT_LE(oracle::rel_err(dot(a, b), oracle::dot(a.values(), b.values())), 1e-12);
}

TEST(Dot, LengthMismatchIsDimensionError) {
  EXPECT_THROW(dot(RealVector{1, 2}, RealVector{1}), DimensionError);
}

TEST(Dot, NonFiniteResultIsNumericalError) {
  const double big = std::numeric_limits<double>::max();
  EXPECT_THROW(dot(RealVector{big, big}, RealVector{big, big}), NumericalError);
}

TEST(Dot, SymmetricExactly) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const RealVector a = sample_uniform(rng, -3, 3, 1 + seed);
    const RealVector b = sample_uniform(rng, -3, 3, 1 + seed);
    EXPECT_EQ(dot(a, b), dot(b, a));
  }
}

TEST(ScaledAdd, ZeroScaleReturnsY) {
  const RealVector x{1, 2, 3};
  const RealVector y{4, 5, 6};
  EXPECT_EQ(scaled_add(0.0, x, y), y);
}

TEST(ScaledAdd, SelfCancellation) {
  const RealVector x{1.5, -2.25, 3.0};
  EXPECT_EQ(scaled_add(-1.0, x, x), zeros(3));
}

TEST(ScaledAdd, DirectArithmetic) {
  EXPECT_EQ(scaled_add(0.5, RealVector{2, 4}, RealVector{1, 1}), (RealVector{2, 3}));
}

TEST(ScaledAdd, InputsUnmodified) {
  const RealVector x{1, 2};
  RealVector y{3, 4};
  const RealVector y_before = y;
  (void)scaled_add(2.0, x, y);
  EXPECT_EQ(y, y_before);
  EXPECT_EQ(x, (RealVector{1, 2}));
}

TEST(ScaledAdd, LengthMismatch) {
  EXPECT_THROW(scaled_add(1.0, RealVector{1}, RealVector{1, 2}), DimensionError);
}

TEST(ScaledAdd, RoundTripProperty) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const RealVector x = sample_uniform(rng, -10, 10, 32);
    const RealVector y = sample_uniform(rng, -10, 10, 32);
    const double alpha = rng.uniform(-4, 4);
    const RealVector back = scaled_add(alpha, x, scaled_add(-alpha, x, y));
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_LE(std::abs(back[i] - y[i]), 1e-12 * std::max(1.0, std::abs(y[i])));
    }
  }
}

TEST(ScaledAdd, OverflowIsNumericalError) {
  const double big = std::numeric_limits<double>::max();
  EXPECT_THROW(scaled_add(2.0, RealVector{big}, RealVector{big}), NumericalError);
}

TEST(Axpy, InPlace) {
  RealVector y{1, 1};
  axpy(2.0, RealVector{1, 2}, y);
  EXPECT_EQ(y, (RealVector{3, 5}));
  EXPECT_THROW(axpy(1.0, RealVector{1}, y), DimensionError);
}

TEST(Linalg, SquaredNormAndFinite) {
  EXPECT_DOUBLE_EQ(squared_norm(RealVector{3, 4}), 25.0);
  EXPECT_TRUE(all_finite(RealVector{1, 2}.span()));
  const RealVector bad{1, std::nan("")};
  EXPECT_FALSE(all_finite(bad.span()));
  EXPECT_THROW(require_finite(bad.span(), "bad"), NumericalError);
}
