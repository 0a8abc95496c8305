// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "thermocal/thermocal.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace {

using namespace thermocal;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

ThermalPlantSpec noiseless(ThermalPlantSpec plant) {
  plant.beam_sigma_um = 0.0;
  plant.beam_offsets_um = {0.0, 0.0, 0.0};
  plant.vibration_sigma_um = 0.0;
  return plant;
}

std::vector<ScenarioDataset> campaign(const ThermalPlantSpec& plant, int first_variant, int count, std::uint64_t seed,
                                      const std::string& prefix) {
  std::vector<ScenarioDataset> out;
  for (int k = 0; k < count; ++k)
    out.push_back(simulate_scenario(make_duty_cycle_scenario(first_variant + k), plant, kDefaultQ0Mm,
                                    derive_seed(seed, static_cast<std::uint64_t>(first_variant + k)),
                                    prefix + std::to_string(k + 1)));
  return out;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// 1 -------------------------------------------------------------------------
Outcome coefficient_recovery() {
  const auto plant = noiseless(make_reference_plant());
  const auto ds = simulate_scenario(make_duty_cycle_scenario(0), plant, kDefaultQ0Mm, 1, "recovery");
  const auto t0 = Clock::now();
  const auto result = fit(ds, plant.true_model.config());
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& got = result.model.terms()[s];
    const auto& want = plant.true_model.terms()[s];
    worst = std::max({worst, rel_err(got.a, want.a), rel_err(got.b, want.b)});
  }
  return {worst < 1e-9 && elapsed < 1.0,
          "max relative error " + fmt(worst, 3) + ", fit time " + fmt(elapsed, 3) + " s"};
}

// 2 -------------------------------------------------------------------------
Outcome drift_reduction() {
  const auto t0 = Clock::now();
  const auto plant = make_reference_plant(17, 4, 14);
  const auto training = campaign(plant, 0, 3, 2024, "train-");
  const auto held_out = campaign(plant, 3, 5, 2024, "valid-");
  const auto matrices = rank_all(std::span<const ScenarioDataset>(training));
  const auto pareto = pareto_front(matrices);
  const auto best = pareto.front.front().config;
  const auto model = fit(std::span<const ScenarioDataset>(training), best).model;
  const auto report = cross_validate(model, held_out);
  const double elapsed = seconds_since(t0);
  const double rmax = report.pooled.reduction_max_pct.value_or(-1.0);
  const double rmean = report.pooled.reduction_mean_pct.value_or(-1.0);
  return {rmax >= 70.0 && rmean >= 80.0 && elapsed < 60.0,
          "config " + best.label() + ", max " + fmt(report.pooled.max_drift_um, 4) + " -> " +
              fmt(report.pooled.max_residual_um, 4) + " um (" + fmt(rmax, 4) + "%), mean " +
              fmt(report.pooled.mean_abs_drift_um, 4) + " -> " + fmt(report.pooled.mean_abs_residual_um, 4) +
              " um (" + fmt(rmean, 4) + "%), " + fmt(elapsed, 3) + " s"};
}

// 3 -------------------------------------------------------------------------
Outcome ranking_combinatorics() {
  const auto plant = make_reference_plant();
  const auto training = campaign(plant, 0, 2, 7, "train-");
  std::size_t calls = 0;
  const auto counting = [&calls](std::span<const ScenarioDataset> ds, const SensorConfig& c, const OutlierPolicy& p) {
    ++calls;
    return fit(ds, c, p).report;
  };
  const auto m = rank_all(std::span<const ScenarioDataset>(training), {}, counting);
  bool symmetric = true;
  bool diagonal = true;
  for (int i = 0; i < m.n(); ++i) {
    for (int j = 0; j < m.n(); ++j)
      symmetric = symmetric && m.status(i, j) == m.status(j, i) &&
                  std::bit_cast<std::uint64_t>(m.rmse(i, j)) == std::bit_cast<std::uint64_t>(m.rmse(j, i)) &&
                  std::bit_cast<std::uint64_t>(m.linf(i, j)) == std::bit_cast<std::uint64_t>(m.linf(j, i));
    const auto single = fit(std::span<const ScenarioDataset>(training), SensorConfig::single(i + 1)).report;
    diagonal = diagonal && m.rmse(i, i) == single.rmse_um && m.linf(i, i) == single.linf_um;
  }
  return {m.n() == 17 && calls == 170 && m.fits_executed == 170 && symmetric && diagonal,
          std::to_string(calls) + " fits (required 170; 17 sensors have " + std::to_string(17 * 16 / 2) +
              " unordered pairs + 17 singles = " + std::to_string(17 * 16 / 2 + 17) +
              " distinct configurations), symmetric=" + (symmetric ? "yes" : "no") +
              ", diagonal=singles: " + (diagonal ? "yes" : "no")};
}

// 4 -------------------------------------------------------------------------
Outcome pareto_oracle() {
  std::mt19937_64 gen(4);
  std::size_t mismatches = 0;
  std::size_t tie_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 12)(gen);
    const bool coarse = trial % 2 == 0;
    CriteriaMatrices m(n);
    std::vector<SensorConfig> configs;
    std::vector<oracle::Point> pts;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        if (gen() % 10 == 0 && !(i == n - 1 && j == n - 1 && pts.empty()))
          continue; // degenerate cell
        const double r = coarse ? double(gen() % 5) : std::uniform_real_distribution<double>(0.1, 2.0)(gen);
        const double l = coarse ? double(gen() % 5) : std::uniform_real_distribution<double>(0.1, 4.0)(gen);
        m.set(i, j, CellStatus::ok, r, l);
        configs.push_back(CriteriaMatrices::config_of(i, j));
        pts.push_back({r, l});
      }
    std::set<SensorConfig> expected;
    for (auto idx : oracle::brute_force_front(pts))
      expected.insert(configs[idx]);
    std::set<SensorConfig> got;
    for (const auto& e : pareto_front(m).front)
      got.insert(e.config);
    mismatches += got != expected;
    std::set<std::pair<double, double>> distinct;
    for (auto idx : oracle::brute_force_front(pts))
      distinct.insert({pts[idx].rmse, pts[idx].linf});
    tie_cases += distinct.size() < expected.size();
  }
  return {mismatches == 0,
          "1000 matrices, " + std::to_string(mismatches) + " mismatches, " + std::to_string(tie_cases) +
              " with tied front members"};
}

// 5 -------------------------------------------------------------------------
Outcome least_squares_oracle() {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst_coef = 0.0;
  double worst_orth = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 4)(gen);
    const int p = std::uniform_int_distribution<int>(k, 50)(gen);
    Eigen::MatrixXd x(p, k);
    Eigen::VectorXd y(p);
    for (;;) {
      for (int r = 0; r < p; ++r) {
        for (int c = 0; c < k; ++c)
          x(r, c) = nd(gen) * std::pow(10.0, c);
        y(r) = 3.0 * nd(gen);
      }
      Eigen::VectorXd s(k);
      for (int c = 0; c < k; ++c)
        s(c) = x.col(c).norm();
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x * s.cwiseInverse().asDiagonal());
      const auto& sv = svd.singularValues();
      if (sv(k - 1) > 0.0 && sv(0) / sv(k - 1) <= 1e3)
        break;
    }
    const auto sol = solve_least_squares(x, y);
    oracle::Matrix rows(static_cast<std::size_t>(p), std::vector<double>(static_cast<std::size_t>(k)));
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < k; ++c)
        rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = x(r, c);
    const auto ref = oracle::normal_equations(rows, std::vector<double>(y.data(), y.data() + p));
    for (int c = 0; c < k; ++c)
      worst_coef = std::max(worst_coef, rel_err(sol.coeffs(c), ref[static_cast<std::size_t>(c)]));
    const Eigen::VectorXd r = y - x * sol.coeffs;
    worst_orth = std::max(worst_orth, (x.transpose() * r).cwiseAbs().maxCoeff() / y.norm());
  }
  return {worst_coef < 1e-8 && worst_orth < 1e-6,
          "500 designs, max relative coefficient error " + fmt(worst_coef, 3) + ", max |X'r|/||y|| " +
              fmt(worst_orth, 3)};
}

// 6 -------------------------------------------------------------------------
Outcome norm_identities() {
  bool ok = true;
  const std::vector<double> pyth{3.0, 4.0};
  const auto a = residual_norms(pyth);
  ok = ok && std::abs(a.rmse - 5.0 / std::sqrt(2.0)) < 1e-15 && a.linf == 4.0;
  const std::vector<double> mixed{1.0, -2.0, 1.5};
  const auto b = residual_norms(mixed);
  ok = ok && std::abs(b.rmse - std::sqrt(7.25 / 3.0)) < 1e-15 && b.linf == 2.0;
  const std::vector<double> zero(4, 0.0);
  ok = ok && residual_norms(zero).rmse == 0.0 && residual_norms(zero).linf == 0.0;

  std::mt19937_64 gen(6);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> r(std::uniform_int_distribution<std::size_t>(1, 300)(gen));
    const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-6, 3)(gen));
    for (auto& v : r)
      v = scale * std::normal_distribution<double>(0.0, 1.0)(gen);
    if (trial % 10 == 0)
      std::fill(r.begin(), r.end(), r.front());
    const auto n = residual_norms(r);
    double l2 = 0.0;
    for (double v : r)
      l2 += v * v;
    const double rmse = std::sqrt(l2 / double(r.size()));
    const bool good = std::abs(n.rmse - rmse) <= 1e-14 * rmse && n.rmse <= n.linf &&
                      n.linf <= n.rmse * std::sqrt(double(r.size())) * (1.0 + 1e-14);
    violations += !good;
  }
  return {ok && violations == 0,
          std::string("hand vectors ") + (ok ? "ok" : "WRONG") + ", " + std::to_string(violations) +
              " violations over 10000 random vectors"};
}

// 7 -------------------------------------------------------------------------
Outcome effective_cte() {
  constexpr double kTrueA = 1.6e-3; // um/(mm K), i.e. 1.6 um/(m K)
  auto plant = make_reference_plant(17, 7, 14);
  plant.true_model = ExpansionModel({{7, kTrueA, 0.9e-3}}, kDefaultQ0Mm);
  const auto training = campaign(plant, 0, 3, 77, "train-");
  const auto m = rank_all(std::span<const ScenarioDataset>(training));
  const auto single = best_single(m);
  if (!single)
    return {false, "no usable single sensor"};
  const auto model = fit(std::span<const ScenarioDataset>(training), single->config).model;
  const double cte = model.terms()[0].a * 1000.0; // um/(m K)
  const bool in_invar = cte >= 1.2 && cte <= 2.0;
  const bool near_truth = rel_err(model.terms()[0].a, kTrueA) <= 0.10;
  return {in_invar && near_truth,
          "best single sensor " + single->config.label() + ", fitted " + fmt(cte, 5) + " um/(m K), truth " +
              fmt(kTrueA * 1000.0, 3)};
}

// 8 -------------------------------------------------------------------------
Outcome closed_loop() {
  const auto plant = noiseless(make_reference_plant());
  const auto train = simulate_scenario(make_duty_cycle_scenario(0), plant, kDefaultQ0Mm, 8, "train");
  const auto model = fit(train, plant.true_model.config()).model;

  ScenarioSpec spec;
  spec.start_q_mm = 30.0;
  spec.phases = {{PhaseKind::rest, 120.0, 0.0},        {PhaseKind::movement, 600.0, 200.0},
                 {PhaseKind::movement, 480.0, 60.0},   {PhaseKind::rest, 900.0, 0.0},
                 {PhaseKind::movement, 600.0, 230.0},  {PhaseKind::movement, 540.0, 40.0},
                 {PhaseKind::rest, 1500.0, 0.0},       {PhaseKind::movement, 420.0, 150.0},
                 {PhaseKind::rest, 1200.0, 0.0}};
  const auto ds = simulate_scenario(spec, plant, kDefaultQ0Mm, 9, "loop");
  const auto corrected = batch_correct(model, ds);

  const auto truth = plant.true_model.with_q0(ds.q0_mm());
  std::vector<double> dT(static_cast<std::size_t>(ds.n_sensors()));
  double worst = 0.0;
  std::size_t checked = 0, fallbacks = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (!ds.is_valid(k))
      continue;
    ds.temperatures_at(k, dT);
    const double q_cmd = corrected.corrected[k];
    const double q_actual = q_cmd + predict_expansion(truth, q_cmd, dT) / 1000.0;
    worst = std::max(worst, std::abs(q_actual - ds.q_mm()[k]));
    fallbacks += corrected.fallback[k];
    ++checked;
  }

  // identity at zero temperature
  const TimeSeries setpoint(0.0, 1.0, std::vector<double>(ds.q_mm().begin(), ds.q_mm().end()), Unit::millimetre);
  std::vector<TimeSeries> cold;
  for (int s = 0; s < ds.n_sensors(); ++s)
    cold.emplace_back(0.0, 1.0, std::vector<double>(ds.size(), 0.0), Unit::kelvin);
  const auto identity = batch_correct(model, setpoint, cold);
  const bool is_identity = std::ranges::equal(identity.corrected.values(), setpoint.values());

  return {worst < 1e-6 && fallbacks == 0 && is_identity,
          std::to_string(checked) + " valid samples, max |q_actual - q_setpoint| " + fmt(worst, 3) + " mm, " +
              std::to_string(fallbacks) + " fallbacks, zero-dT identity " + (is_identity ? "exact" : "BROKEN")};
}

// 9 -------------------------------------------------------------------------
// Raw acquisition text with absolute temperatures base + dT.
std::string raw_csv(const ScenarioDataset& ds, double base_K, double quantum_K) {
  std::ostringstream os;
  os << "# dataset_id: " << ds.id() << "\n# q0_mm: " << format_double(ds.q0_mm()) << "\n";
  os << "time_s,valid,q_mm,dq_um";
  for (int s = 1; s <= ds.n_sensors(); ++s)
    os << ",T" << (s < 10 ? "0" : "") << s << "_K";
  os << "\n";
  for (std::size_t k = 0; k < ds.size(); ++k) {
    os << format_double(ds.time_s()[k]) << "," << int(ds.valid()[k]) << "," << format_double(ds.q_mm()[k]) << ","
       << format_double(ds.delta_q_um()[k]);
    for (int s = 1; s <= ds.n_sensors(); ++s) {
      double dT = ds.delta_T_K(s)[k];
      if (quantum_K > 0.0)
        dT = std::round(dT / quantum_K) * quantum_K;
      os << "," << format_double(base_K + dT);
    }
    os << "\n";
  }
  return os.str();
}

struct Downstream {
  CriteriaMatrices matrices{1};
  std::vector<ParetoEntry> front;
  ExpansionModel model{{{1, 0.0, 0.0}}, kDefaultQ0Mm};
  FitReport report;
  ValidationReport validation;
};

Downstream downstream(const std::vector<std::string>& train_csv, const std::string& held_csv) {
  std::vector<ScenarioDataset> train;
  for (const auto& text : train_csv)
    train.push_back(align_and_zero(parse_raw_channels(text), 1.0));
  const auto held = align_and_zero(parse_raw_channels(held_csv), 1.0);
  Downstream d;
  d.matrices = rank_all(std::span<const ScenarioDataset>(train));
  d.front = pareto_front(d.matrices).front;
  auto f = fit(std::span<const ScenarioDataset>(train), d.front.front().config);
  d.model = f.model;
  d.report = f.report;
  d.validation = cross_validate(d.model, std::vector<ScenarioDataset>{held});
  return d;
}

double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::isfinite(a[k]) || std::isfinite(b[k]))
      worst = std::max(worst, std::abs(a[k] - b[k]) / std::max(std::abs(a[k]), 1e-300));
  return worst;
}

Outcome invariances() {
  const auto plant = make_reference_plant(8, 3, 7);
  const auto train = campaign(plant, 0, 2, 99, "train-");
  const auto held = simulate_scenario(make_duty_cycle_scenario(5), plant, kDefaultQ0Mm, 100, "held");

  // thermocouple readings on the acquisition's 1/1024 K grid: shifts are exact
  const double q = 1.0 / 1024.0;
  const auto a = downstream({raw_csv(train[0], 293.0, q), raw_csv(train[1], 293.0, q)}, raw_csv(held, 293.0, q));
  const auto b = downstream({raw_csv(train[0], 298.0, q), raw_csv(train[1], 298.0, q)}, raw_csv(held, 298.0, q));
  auto same_bits = [](std::span<const double> x, std::span<const double> y) {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (std::bit_cast<std::uint64_t>(x[k]) != std::bit_cast<std::uint64_t>(y[k]))
        return false;
    return true;
  };
  const bool exact = same_bits(a.matrices.rmse_data(), b.matrices.rmse_data()) &&
                     same_bits(a.matrices.linf_data(), b.matrices.linf_data()) && a.front == b.front &&
                     a.model == b.model && a.report == b.report && a.validation == b.validation;

  // unquantised readings at an arbitrary base: agreement to round-off
  const auto c = downstream({raw_csv(train[0], 293.15, 0.0), raw_csv(train[1], 293.15, 0.0)}, raw_csv(held, 293.15, 0.0));
  const auto d = downstream({raw_csv(train[0], 298.15, 0.0), raw_csv(train[1], 298.15, 0.0)}, raw_csv(held, 298.15, 0.0));
  const double drift = std::max(max_rel_diff(c.matrices.rmse_data(), d.matrices.rmse_data()),
                                max_rel_diff(c.matrices.linf_data(), d.matrices.linf_data()));
  bool same_front = c.front.size() == d.front.size();
  for (std::size_t k = 0; same_front && k < c.front.size(); ++k)
    same_front = c.front[k].config == d.front[k].config;
  const bool close = drift < 1e-9 && same_front;

  // pair (i, j) against (j, i)
  bool order = true;
  for (int i = 1; i <= 8; ++i)
    for (int j = i + 1; j <= 8; ++j) {
      const auto fwd = fit(std::span<const ScenarioDataset>(train), SensorConfig::pair(i, j));
      const auto rev = fit(std::span<const ScenarioDataset>(train), SensorConfig::pair(j, i));
      order = order && fwd.model == rev.model && fwd.report == rev.report;
    }

  return {exact && close && order,
          std::string("offset on quantised readings ") + (exact ? "bit-identical" : "DIFFERS") +
              ", unquantised max relative change " + fmt(drift, 3) + (same_front ? "" : " (front differs)") +
              ", (i,j) vs (j,i) " + (order ? "identical" : "DIFFER")};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"coefficient recovery", coefficient_recovery},
      {"drift reduction at desk scale", drift_reduction},
      {"ranking combinatorics", ranking_combinatorics},
      {"pareto oracle equivalence", pareto_oracle},
      {"least-squares oracle equivalence", least_squares_oracle},
      {"norm identities", norm_identities},
      {"effective CTE plausibility", effective_cte},
      {"closed-loop correction", closed_loop},
      {"zero-reference and permutation invariance", invariances},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
