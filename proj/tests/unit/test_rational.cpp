#include <gtest/gtest.h>

#include <random>

#include "cutup/rational.hpp"

using cutup::Rational;

TEST(Rational, ParsesDecimalsAndFractions) {
  EXPECT_EQ(Rational::parse("165"), Rational(165));
  EXPECT_EQ(Rational::parse("61.5"), Rational(123, 2));
  EXPECT_EQ(Rational::parse("0.040"), Rational(1, 25));
  EXPECT_EQ(Rational::parse("-3.25"), Rational(-13, 4));
  EXPECT_EQ(Rational::parse("30000/1001"), Rational(30000, 1001));
  EXPECT_EQ(Rational::parse(".5"), Rational(1, 2));
}

TEST(Rational, RejectsGarbage) {
  for (const char* bad : {"", "abc", "1.2.3", "1/0", "--1", "1e3", " 1"})
    EXPECT_THROW(Rational::parse(bad), std::invalid_argument) << bad;
}

TEST(Rational, FormatsExactDecimalsOrFractions) {
  EXPECT_EQ(Rational(123, 2).to_string(), "61.5");
  EXPECT_EQ(Rational(165).to_string(), "165");
  EXPECT_EQ(Rational(-1, 8).to_string(), "-0.125");
  EXPECT_EQ(Rational(1, 1'000'000).to_string(), "0.000001");
  EXPECT_EQ(Rational(1, 3).to_string(), "1/3");
}

TEST(Rational, FloorCeilRound) {
  EXPECT_EQ(Rational(7, 2).floor(), 3);
  EXPECT_EQ(Rational(-7, 2).floor(), -4);
  EXPECT_EQ(Rational(7, 2).ceil(), 4);
  EXPECT_EQ(Rational(-7, 2).ceil(), -3);
  EXPECT_EQ(Rational(7, 2).round(), 4);
  EXPECT_EQ(Rational(-7, 2).round(), -4);
  EXPECT_EQ(Rational(3584, 9).round(), 398);  // 640 * 224 / 360
  EXPECT_EQ(Rational(6).ceil(), 6);
}

TEST(Rational, OverflowIsReported) {
  const Rational big(INT64_MAX);
  EXPECT_THROW(big * Rational(2), std::overflow_error);
  EXPECT_THROW(Rational(1) / Rational(0), std::domain_error);
}

TEST(Rational, DecimalRoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t den = std::int64_t{1} << (rng() % 20);
    const Rational r(static_cast<std::int64_t>(rng() % 2'000'000'000) - 1'000'000'000, den * ((rng() % 2) ? 5 : 1));
    EXPECT_EQ(Rational::parse(r.to_string()), r);
  }
}
