#include "thermocal/validation.hpp"
#include "thermocal/simulator.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

namespace thermocal {
namespace {

TEST(ReductionPct, ReportedFigures) {
  EXPECT_NEAR(*reduction_pct(7.81, 1.28), 83.61075544, 1e-8);
  EXPECT_NEAR(*reduction_pct(2.50, 0.28), 88.8, 1e-12);
  EXPECT_EQ(*reduction_pct(1.0, 0.0), 100.0);
  EXPECT_FALSE(reduction_pct(0.0, 0.0).has_value());
  EXPECT_FALSE(reduction_pct(0.0, 0.3).has_value());
}

TEST(DriftStatistics, HandComputed) {
  const std::vector<double> measured{0.0, 2.0, -4.0, 1.0};
  const std::vector<double> residual{0.0, 0.5, 0.25, -1.0};
  const auto s = drift_statistics(measured, residual);
  EXPECT_EQ(s.n_samples, 4u);
  EXPECT_EQ(s.max_drift_um, 4.0);
  EXPECT_EQ(s.max_residual_um, 1.0);
  EXPECT_EQ(s.mean_abs_drift_um, 1.75);
  EXPECT_EQ(s.mean_abs_residual_um, 0.4375);
  EXPECT_EQ(*s.reduction_max_pct, 75.0);
  EXPECT_EQ(*s.reduction_mean_pct, 75.0);
}

TEST(DriftStatistics, ZeroDriftHasNoReduction) {
  const std::vector<double> zero(5, 0.0);
  const auto s = drift_statistics(zero, zero);
  EXPECT_FALSE(s.reduction_max_pct);
  EXPECT_FALSE(s.reduction_mean_pct);
  EXPECT_THROW(drift_statistics(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(CrossValidate, InSampleNoiselessIsComplete) {
  const auto ds = oracle::synthetic_dataset({{2, {1.4e-3, 0.9e-3}}}, 3, 200, 17);
  const auto model = fit(ds, SensorConfig::single(2)).model;
  const std::vector<ScenarioDataset> sc{ds};
  const auto r = cross_validate(model, sc, ValidationOptions{true});
  EXPECT_NEAR(*r.pooled.reduction_max_pct, 100.0, 1e-6);
  EXPECT_NEAR(*r.pooled.reduction_mean_pct, 100.0, 1e-6);
}

TEST(CrossValidate, RefusesTrainingScenarios) {
  const auto a = oracle::synthetic_dataset({{1, {1e-3, 1e-3}}}, 1, 50, 1, 500.0, "train");
  const auto b = oracle::synthetic_dataset({{1, {1e-3, 1e-3}}}, 1, 50, 2, 500.0, "held-out");
  const auto model = fit(a, SensorConfig::single(1)).model;
  const std::vector<ScenarioDataset> mixed{b, a};
  try {
    cross_validate(model, mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::leakage);
    EXPECT_NE(std::string(e.what()).find("train"), std::string::npos);
  }
  const std::vector<ScenarioDataset> clean{b};
  EXPECT_NO_THROW(cross_validate(model, clean));
}

TEST(CrossValidate, ModelIsFrozen) {
  const auto plant = make_reference_plant();
  const auto train = simulate_scenario(make_duty_cycle_scenario(0), plant, 500.0, 1, "t");
  const std::vector<ScenarioDataset> held{simulate_scenario(make_duty_cycle_scenario(1), plant, 500.0, 2, "v1"),
                                          simulate_scenario(make_duty_cycle_scenario(2), plant, 500.0, 3, "v2")};
  const auto model = fit(train, SensorConfig::pair(4, 14)).model;
  const auto first = cross_validate(model, held);
  const auto second = cross_validate(model, held);
  EXPECT_EQ(first, second);
  ASSERT_EQ(first.scenarios.size(), 2u);
  EXPECT_EQ(first.scenarios[1].id, "v2");
  EXPECT_EQ(first.config, SensorConfig::pair(4, 14));
  std::size_t total = 0;
  for (const auto& s : first.scenarios) {
    total += s.stats.n_samples;
    EXPECT_LE(s.stats.max_drift_um, first.pooled.max_drift_um);
  }
  EXPECT_EQ(total, first.pooled.n_samples);
}

TEST(ValidationTrace, ResidualIsMeasuredMinusPredicted) {
  const auto ds = oracle::synthetic_dataset({{1, {1e-3, 1e-3}}}, 1, 20, 9);
  const ExpansionModel half({{1, 0.5e-3, 0.5e-3}}, 500.0);
  for (const auto& s : validation_trace(half, ds)) {
    EXPECT_EQ(s.residual_um, s.measured_um - s.predicted_um);
    EXPECT_NEAR(s.predicted_um, 0.5 * s.measured_um, 1e-12);
  }
}

} // namespace
} // namespace thermocal
