#include "mq/errors.hpp"
#include "mq/scaling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace mq {
namespace {

TimeSeries sampled(const std::function<double(double)>& f, double t_max, double dt) {
  TimeSeries s;
  s.grid = {t_max, dt};
  for (std::size_t k = 0; k < s.grid.count(); ++k) s.values.push_back(f(s.grid.time(k)));
  return s;
}

CollapseMember member(int n, const std::function<double(double)>& f_of_x, double x_max = 2.0, double dt = 0.05) {
  return {sampled([&](double t) { return f_of_x(t / n); }, x_max * n, dt), n, 0.0, 0.0};
}

TEST(Rescale, TimeOverN) {
  const auto s = sampled([](double t) { return t; }, 1.0, 0.5);
  const auto c = rescale_time(s, 4);
  EXPECT_EQ(c.x, (std::vector<double>{0.0, 0.125, 0.25}));
  EXPECT_EQ(c.y, s.values);
  EXPECT_EQ(unrescale_time(c, 4).x, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_THROW(rescale_time(s, 0), ConfigError);
}

TEST(LowPass, ConstantAndLinearInterior) {
  const auto c = sampled([](double) { return 0.7; }, 10.0, 0.1);
  for (double v : low_pass(c, 10, 0.1).values) EXPECT_NEAR(v, 0.7, 1e-14);
  const auto lin = sampled([](double t) { return 2.0 * t; }, 10.0, 0.1);
  const auto f = low_pass(lin, 10, 0.1);
  for (std::size_t k = 10; k + 10 < f.values.size(); ++k) EXPECT_NEAR(f.values[k], lin.values[k], 1e-12);
  EXPECT_THROW(low_pass(lin, 10, 0.02), ConfigError);
  EXPECT_THROW(low_pass(lin, 10, 2.0), ConfigError);
}

TEST(LowPass, SuppressesFastOscillation) {
  const auto s = sampled([](double t) { return 0.5 + 0.3 * std::cos(20.0 * std::numbers::pi * t); }, 20.0, 0.01);
  const auto f = low_pass(s, 10, 0.1);
  for (std::size_t k = 100; k + 100 < f.values.size(); ++k) EXPECT_NEAR(f.values[k], 0.5, 0.01);
}

TEST(CollapseDistance, IdenticalCurvesGiveZero) {
  CollapseFamily fam;
  for (int n : {10, 14, 18}) fam.members.push_back(member(n, [](double x) { return std::cos(3.0 * x); }));
  EXPECT_NEAR(collapse_distance(fam, 0.0, 2.0).value, 0.0, 1e-3);
  EXPECT_NEAR(collapse_distance(fam, 0.0, 2.0, 0.2).value, 0.0, 1e-3);
}

TEST(CollapseDistance, ConstantOffsetsAndPermutation) {
  const double c = 0.1;
  CollapseFamily fam;
  for (int i = 0; i < 3; ++i) fam.members.push_back(member(10 + 4 * i, [=](double) { return i * c; }));
  const auto m = collapse_distance(fam, 0.0, 2.0);
  EXPECT_NEAR(m.value, 4.0 * c / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.x_min, 0.0);
  EXPECT_NEAR(m.x_max, 2.0, 1e-12);
  std::reverse(fam.members.begin(), fam.members.end());
  EXPECT_NEAR(collapse_distance(fam, 0.0, 2.0).value, m.value, 1e-14);
  fam.members.resize(1);
  EXPECT_EQ(collapse_distance(fam, 0.0, 2.0).value, 0.0);
}

TEST(CollapseDistance, Validation) {
  CollapseFamily fam;
  EXPECT_THROW(collapse_distance(fam, 0.0, 1.0), ConfigError);
  fam.members.push_back(member(10, [](double) { return 0.0; }, 1.0));
  EXPECT_THROW(collapse_distance(fam, 1.0, 0.5), ConfigError);
  EXPECT_THROW(collapse_distance(fam, 1.5, 2.0), ConfigError);
}

TEST(CollapseDistance, GrowsLinearlyWithNoiseOnOneMember) {
  auto family_with_noise = [](double a) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    CollapseFamily fam;
    for (int n : {10, 14, 18}) fam.members.push_back(member(n, [](double x) { return std::cos(2.0 * x); }));
    for (auto& v : fam.members[0].series.values) v += a * gauss(rng);
    return fam;
  };
  const double small = collapse_distance(family_with_noise(0.01), 0.0, 2.0).value;
  const double large = collapse_distance(family_with_noise(0.04), 0.0, 2.0).value;
  EXPECT_GT(small, 0.0);
  EXPECT_NEAR(large / small, 4.0, 0.5);
}

TEST(Tuning, TficLambda) {
  EXPECT_NEAR(tune_tfic_lambda(20, 1.0, 1.0), 0.95, 1e-15);
  EXPECT_NEAR(tune_tfic_lambda(20, 1.0, 1.0, true), 1.05, 1e-15);
  EXPECT_NEAR(tune_tfic_lambda(16, 1.0, 2.0), 0.75, 1e-15);
  EXPECT_DOUBLE_EQ(tune_tfic_lambda(12, 0.0, 1.0), 1.0);
  EXPECT_THROW(tune_tfic_lambda(4, 8.0, 1.0), ConfigError);
  EXPECT_THROW(tune_tfic_lambda(10, 1.0, 0.0), ConfigError);
}

XiTable exponential_law_table(double a) {
  XiTable t;
  for (double jp : {0.3, 0.4, 0.5, 0.6, 0.7}) t.entries.emplace_back(jp, std::exp(a / jp));
  return t;
}

TEST(Tuning, KondoJPrimeInvertsTheTable) {
  const auto table = exponential_law_table(2.0);
  const double jp = tune_kondo_j_prime(20, 1.0, table);
  EXPECT_NEAR(jp, 2.0 / std::log(20.0), 1e-12);
  EXPECT_NEAR(interpolate_xi(table, jp), 20.0, 1e-10);
  for (const auto& [j, xi] : table.entries) EXPECT_NEAR(tune_kondo_j_prime(20, 20.0 / xi, table), j, 1e-9);
  EXPECT_THROW(tune_kondo_j_prime(5, 1.0, table), ConfigError);
  EXPECT_THROW(tune_kondo_j_prime(2000, 1.0, table), ConfigError);
  XiTable bad{{{0.3, 5.0}, {0.4, 6.0}}};
  EXPECT_THROW(tune_kondo_j_prime(20, 4.0, bad), ConfigError);
  EXPECT_THROW(tune_kondo_j_prime(20, 1.0, XiTable{}), ConfigError);
}

// m(t) = F(t/N, N |lambda - 1|^nu_true): exact collapse only at the true exponent.
CollapseFamily synthetic_family(double nu, double nu_true) {
  CollapseFamily fam;
  fam.target_ratio = 1.0;
  for (int n : {10, 14, 18, 22}) {
    const double lambda = tune_tfic_lambda(n, 1.0, nu);
    const double s = n * std::pow(std::abs(1.0 - lambda), nu_true);
    fam.members.push_back(member(n, [=](double x) { return std::exp(-s * x) * std::cos(4.0 * x) + 0.3 * s; }));
    fam.members.back().control = lambda;
  }
  return fam;
}

TEST(EstimateNu, RecoversSyntheticExponent) {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.5 + 0.05 * i);
  const auto scan = estimate_nu([](double nu) { return synthetic_family(nu, 1.0); }, grid, 0.0, 2.0, std::nullopt);
  EXPECT_NEAR(scan.nu_best, 1.0, 0.05 + 1e-12);
  EXPECT_EQ(scan.metrics.size(), grid.size());
}

TEST(EstimateNu, FlatMetricWarns) {
  const std::vector<double> grid{0.5, 1.0, 1.5};
  const auto scan = estimate_nu(
      [](double) {
        CollapseFamily fam;
        for (int n : {10, 14, 18}) fam.members.push_back(member(n, [](double x) { return std::sin(x); }));
        return fam;
      },
      grid, 0.0, 2.0, std::nullopt);
  ASSERT_EQ(scan.warnings.size(), 1u);
  EXPECT_NE(scan.warnings[0].find("flat"), std::string::npos);
}

TEST(EstimateNu, NeedsThreeSizes) {
  const std::vector<double> grid{0.5, 1.0};
  EXPECT_THROW(estimate_nu(
                   [](double) {
                     CollapseFamily fam;
                     for (int n : {10, 14}) fam.members.push_back(member(n, [](double x) { return x; }));
                     return fam;
                   },
                   grid, 0.0, 1.0, std::nullopt),
               ConfigError);
}

TEST(ScalingWindow, AgreementBeforeBreakOnly) {
  CollapseFamily fam;
  for (int n : {12, 16, 20})
    fam.members.push_back(member(n, [=](double x) { return x < 0.5 ? std::cos(x) : std::cos(x) + 0.01 * n * (x - 0.5); }, 1.0));
  const auto w = kondo_scaling_window(fam);
  EXPECT_NEAR(w.pre_metric, 0.0, 1e-5);
  EXPECT_GT(w.post_metric, 0.0);
  EXPECT_GT(w.ratio, 2.0);
  fam.members.resize(1);
  const auto single = kondo_scaling_window(fam);
  EXPECT_EQ(single.pre_metric, 0.0);
  EXPECT_EQ(single.post_metric, 0.0);
  CollapseFamily short_fam;
  for (int n : {12, 16}) short_fam.members.push_back(member(n, [](double x) { return x; }, 0.4));
  EXPECT_THROW(kondo_scaling_window(short_fam), ConfigError);
}

}  // namespace
}  // namespace mq
