#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kscons/motility.hpp"

using namespace kscons;

namespace {

// gamma(s) = s e^{-s} sampled with its exact derivative.
Motility s_exp_table(double s_max = 4.0, int knots = 201) {
  MotilityTable t;
  for (int k = 0; k < knots; ++k) {
    const double s = s_max * k / (knots - 1);
    t.s.push_back(s);
    t.gamma.push_back(s * std::exp(-s));
    t.gamma_prime.push_back((1.0 - s) * std::exp(-s));
  }
  return Motility::table(t);
}

}  // namespace

TEST(Motility, PowerValues) {
  EXPECT_EQ(Motility::power(1.0).gamma(0.0), 0.0);
  EXPECT_DOUBLE_EQ(Motility::power(2.0).gamma(0.5), 0.25);
  // 0.09^1.5 = 0.3^3 = 0.027 exactly in real arithmetic.
  EXPECT_NEAR(Motility::power(1.5).gamma(0.09), 0.027, 1e-16);
}

TEST(Motility, PowerDerivatives) {
  const Motility lin = Motility::power(1.0);
  for (double s : {0.0, 0.3, 5.0}) EXPECT_EQ(lin.gamma_prime(s), 1.0);
  EXPECT_DOUBLE_EQ(Motility::power(2.0).gamma_prime(0.5), 1.0);
  const Motility m = Motility::power(1.5);
  EXPECT_DOUBLE_EQ(m.gamma_prime(0.25), 0.75);
  const double h = 1e-6;
  EXPECT_NEAR((m.gamma(0.25 + h) - m.gamma(0.25 - h)) / (2 * h), 0.75, 1e-8);
}

TEST(Motility, RejectsNegativeArgument) {
  EXPECT_THROW(Motility::power(1.0).gamma(-0.1), MotilityError);
  EXPECT_THROW(Motility::power(1.0).gamma_prime(-1e-9), MotilityError);
}

TEST(Motility, RejectsNonDegenerateAndInvalidSpecs) {
  EXPECT_THROW(Motility::power(0.5), MotilityError);
  EXPECT_THROW(Motility::power_sum({{1.0, 1.0}, {-2.0, 1.0}}), MotilityError);  // negative on (0, s_max]
  MotilityTable shifted{{0.0, 1.0}, {0.5, 1.5}, {1.0, 1.0}};
  try {
    Motility::table(shifted);
    FAIL() << "expected rejection of gamma(0) > 0";
  } catch (const MotilityError& e) {
    EXPECT_NE(std::string(e.what()).find("vanish at zero"), std::string::npos);
  }
  EXPECT_THROW(Motility::table({{0.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}), MotilityError);
}

TEST(Motility, SupGammaPrimeClosedForms) {
  EXPECT_EQ(Motility::power(1.0).sup_gamma_prime(3.0), 1.0);
  EXPECT_DOUBLE_EQ(Motility::power(2.0).sup_gamma_prime(0.5), 1.0);
  EXPECT_DOUBLE_EQ(Motility::power(2.0).sup_gamma_prime(0.1), 0.2);
  EXPECT_DOUBLE_EQ(Motility::power_sum({{1.0, 1.0}, {2.0, 2.0}}).sup_gamma_prime(1.0), 5.0);
}

TEST(Motility, SupGammaPrimeTableAttainedAtZero) {
  // Dense-scan oracle on the exact derivative (1 - s) e^{-s} over [0, 2].
  double oracle = 0.0;
  for (int k = 0; k <= 100000; ++k) {
    const double s = 2.0 * k / 100000;
    oracle = std::max(oracle, std::abs((1.0 - s) * std::exp(-s)));
  }
  EXPECT_NEAR(oracle, 1.0, 1e-15);
  EXPECT_NEAR(s_exp_table().sup_gamma_prime(2.0), oracle, 1e-12);
}

TEST(Motility, SupGammaOfNonMonotoneTable) {
  // max of s e^{-s} is e^{-1} at s = 1.
  EXPECT_NEAR(s_exp_table().sup_gamma(3.0), std::exp(-1.0), 1e-9);
}

TEST(Motility, SupGammaPrimeIsMonotoneInV) {
  for (const Motility& m : {Motility::power(1.5), s_exp_table(), Motility::power_sum({{0.5, 1.0}, {1.0, 3.0}})}) {
    double prev = 0.0;
    for (double v = 0.0; v <= 3.0; v += 0.125) {
      const double cur = m.sup_gamma_prime(v);
      EXPECT_GE(cur, prev);
      prev = cur;
    }
  }
}

TEST(Motility, FiniteDifferenceConsistency) {
  const double h = 1e-5;
  for (const Motility& m : {Motility::power(1.0), Motility::power(2.5), s_exp_table(),
                            Motility::power_sum({{0.5, 1.0}, {1.0, 3.0}})}) {
    for (int k = 0; k <= 200; ++k) {
      const double s = 3.0 * k / 200;
      const double defect = std::abs(m.gamma(s + h) - m.gamma(s) - h * m.gamma_prime(s));
      EXPECT_LE(defect, 100.0 * h * h) << m.describe() << " at s=" << s;
    }
  }
}

TEST(Motility, MeanValueBound) {
  for (const Motility& m : {Motility::power(1.0), Motility::power(2.0), s_exp_table()}) {
    for (int k = 1; k <= 100; ++k) {
      const double s = 3.0 * k / 100;
      EXPECT_LE(m.gamma(s), s * m.sup_gamma_prime(s) * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST(Motility, TableInterpolatesKnotsAndContinuesLinearly) {
  const Motility m = s_exp_table(4.0, 41);
  EXPECT_NEAR(m.gamma(1.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(m.gamma(1.05), 1.05 * std::exp(-1.05), 1e-6);
  const double end = 4.0 * std::exp(-4.0), slope = -3.0 * std::exp(-4.0);
  EXPECT_NEAR(m.gamma(4.5), end + 0.5 * slope, 1e-14);
  EXPECT_NEAR(m.gamma_prime(4.5), slope, 1e-15);
}

TEST(Motility, TableFromCsv) {
  const auto path = std::filesystem::temp_directory_path() / "kscons_gamma_table.csv";
  {
    std::ofstream os(path);
    os << "s,gamma,gamma_prime\n0,0,1\n0.5,0.5,1\n1,1,1\n";
  }
  const Motility m = Motility::table_from_csv(path.string());
  EXPECT_NEAR(m.gamma(0.3), 0.3, 1e-15);
  EXPECT_NEAR(m.sup_gamma_prime(1.0), 1.0, 1e-15);
  std::filesystem::remove(path);
}
