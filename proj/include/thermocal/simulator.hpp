#pragma once

// Synthetic test bench: duty-cycle motion profiles, lumped first-order thermal
// nodes, and a three-beam interferometer observing the resulting expansion.

#include "thermocal/core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace thermocal {

/// Seedable generator with a platform-independent normal deviate.
///
/// std::normal_distribution is implementation-defined, so Gaussian samples are
/// drawn with Box-Muller over the raw mt19937_64 stream, whose output the
/// standard fixes bit for bit.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0, 1).
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer; used to derive independent per-scenario seeds.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Motion

enum class PhaseKind { movement, rest };

struct Phase {
  PhaseKind kind = PhaseKind::rest;
  double duration_s = 0.0;
  double target_q_mm = 0.0; // movement only
};

/// Alternating movement (heating) and rest (cooling) phases.
///
/// A movement phase drives the rod from its current position to the target in
/// steps of at most `increment_mm`. Every step moves at `speed_mm_per_s`, is
/// followed by `stabilization_s` of invalid interferometry, and then dwells at
/// the reached position for an equal share of the remaining phase time.
struct ScenarioSpec {
  std::vector<Phase> phases;
  double increment_mm = 10.0;
  double stabilization_s = 5.0;
  double sample_dt_s = 1.0;
  double speed_mm_per_s = 5.0;
  double start_q_mm = 0.0;
  double stroke_mm = kDefaultStrokeMm;
};

namespace detail {

inline std::size_t step_count(double distance_mm, double increment_mm) {
  if (distance_mm <= 0.0)
    return 0;
  return static_cast<std::size_t>(std::ceil(distance_mm / increment_mm - 1e-12));
}

struct Segment {
  double t_begin;
  double t_end;
  double q_begin;
  double q_end;
  bool valid;
  bool heating;
};

inline void check_spec(const ScenarioSpec& spec) {
  if (spec.phases.empty())
    fail(ErrorCode::input, "scenario has no phases");
  if (!(spec.increment_mm > 0.0) || !(spec.speed_mm_per_s > 0.0) || !(spec.sample_dt_s > 0.0))
    fail(ErrorCode::input, "scenario increment, speed and sample period must be positive");
  if (spec.stabilization_s < 0.0)
    fail(ErrorCode::input, "stabilization window must be non-negative");
  if (!(spec.stroke_mm > 0.0))
    fail(ErrorCode::input, "stroke must be positive");
  if (spec.start_q_mm < 0.0 || spec.start_q_mm > spec.stroke_mm)
    fail(ErrorCode::input, "start position outside stroke");
  for (const auto& p : spec.phases) {
    if (!(p.duration_s > 0.0))
      fail(ErrorCode::input, "phase durations must be positive");
    if (p.kind == PhaseKind::movement && (p.target_q_mm < 0.0 || p.target_q_mm > spec.stroke_mm))
      fail(ErrorCode::input, "movement target " + std::to_string(p.target_q_mm) + " mm outside stroke");
  }
}

inline std::vector<Segment> build_segments(const ScenarioSpec& spec, std::size_t& n_steps) {
  std::vector<Segment> segs;
  double t = 0.0;
  double q = spec.start_q_mm;
  n_steps = 0;
  for (const auto& p : spec.phases) {
    const double t_phase_end = t + p.duration_s;
    if (p.kind == PhaseKind::rest) {
      segs.push_back({t, t_phase_end, q, q, true, false});
      t = t_phase_end;
      continue;
    }
    const double delta = p.target_q_mm - q;
    const std::size_t steps = step_count(std::abs(delta), spec.increment_mm);
    if (steps == 0) {
      segs.push_back({t, t_phase_end, q, q, true, true});
      t = t_phase_end;
      continue;
    }
    double busy = 0.0;
    std::vector<double> lengths;
    double remaining = delta;
    for (std::size_t s = 0; s < steps; ++s) {
      const double len = std::abs(remaining) > spec.increment_mm ? std::copysign(spec.increment_mm, delta) : remaining;
      lengths.push_back(len);
      remaining -= len;
      busy += std::abs(len) / spec.speed_mm_per_s + spec.stabilization_s;
    }
    if (busy > p.duration_s + 1e-9)
      fail(ErrorCode::input, "movement phase too short for its steps: needs " + std::to_string(busy) + " s");
    const double dwell = (p.duration_s - busy) / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      const double q_next = (s + 1 == steps) ? p.target_q_mm : q + lengths[s];
      const double t_move = t + std::abs(lengths[s]) / spec.speed_mm_per_s;
      const double t_stab = t_move + spec.stabilization_s;
      segs.push_back({t, t_move, q, q_next, false, true});
      if (spec.stabilization_s > 0.0)
        segs.push_back({t_move, t_stab, q_next, q_next, false, true});
      const double t_dwell_end = (s + 1 == steps) ? t_phase_end : t_stab + dwell;
      if (t_dwell_end > t_stab)
        segs.push_back({t_stab, t_dwell_end, q_next, q_next, true, true});
      q = q_next;
      t = t_dwell_end;
    }
    t = t_phase_end;
    n_steps += steps;
  }
  return segs;
}

} // namespace detail

/// Commanded rod position with its interferometry validity mask, plus the
/// heating input u(t) (1 during movement phases, 0 at rest).
struct MotionProfile {
  TimeSeries setpoint;
  std::vector<double> heating;
  std::size_t n_steps = 0;
};

inline MotionProfile generate_motion(const ScenarioSpec& spec) {
  detail::check_spec(spec);
  std::size_t n_steps = 0;
  const auto segs = detail::build_segments(spec, n_steps);
  const double total = segs.back().t_end;
  const auto n = static_cast<std::size_t>(std::ceil(total / spec.sample_dt_s - 1e-9));

  std::vector<double> q(n);
  std::vector<std::uint8_t> valid(n);
  std::vector<double> heating(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * spec.sample_dt_s;
    while (seg + 1 < segs.size() && t >= segs[seg].t_end)
      ++seg;
    const auto& s = segs[seg];
    const double span = s.t_end - s.t_begin;
    const double frac = span > 0.0 ? std::clamp((t - s.t_begin) / span, 0.0, 1.0) : 1.0;
    q[k] = s.q_begin == s.q_end ? s.q_begin : s.q_begin + (s.q_end - s.q_begin) * frac;
    valid[k] = s.valid ? 1 : 0;
    heating[k] = s.heating ? 1.0 : 0.0;
  }
  return {TimeSeries(0.0, spec.sample_dt_s, std::move(q), std::move(valid), Unit::millimetre), std::move(heating),
          n_steps};
}

// ---------------------------------------------------------------------------
// Thermal plant

struct ThermalNode {
  double tau_s = 1800.0; // time constant
  double gain_K = 1.0;   // steady-state rise under continuous movement
};

/// Sinusoidal ambient drift T_amb(t) = amplitude * sin(2 pi t / period + phase).
struct AmbientDrift {
  double amplitude_K = 0.0;
  double period_s = 86400.0;
  double phase_rad = 0.0;
  double rate_cap_K_per_h = 1.0;

  double at(double t_s) const {
    return amplitude_K * std::sin(2.0 * std::numbers::pi * t_s / period_s + phase_rad);
  }

  double max_rate_K_per_h() const { return 2.0 * std::numbers::pi * amplitude_K / period_s * 3600.0; }
};

struct ThermalPlantSpec {
  std::vector<ThermalNode> nodes; // one per thermocouple, sensor id = index + 1
  AmbientDrift ambient;
  ExpansionModel true_model;
  double beam_sigma_um = 0.1;
  std::array<double, 3> beam_offsets_um{0.0, 0.0, 0.0};
  double vibration_sigma_um = 0.0; // extra scatter on in-motion (invalid) samples

  std::size_t n_sensors() const noexcept { return nodes.size(); }

  void check() const {
    if (nodes.empty())
      fail(ErrorCode::input, "thermal plant has no nodes");
    for (const auto& n : nodes)
      if (!(n.tau_s > 0.0) || !std::isfinite(n.gain_K))
        fail(ErrorCode::input, "thermal node time constants must be positive");
    if (ambient.amplitude_K < 0.0 || ambient.amplitude_K > 2.0)
      fail(ErrorCode::input, "ambient drift amplitude must lie within 2 K");
    if (!(ambient.rate_cap_K_per_h > 0.0) || ambient.rate_cap_K_per_h > 1.0)
      fail(ErrorCode::input, "ambient rate cap must lie in (0, 1] K/h");
    if (!(ambient.period_s > 0.0))
      fail(ErrorCode::input, "ambient period must be positive");
    if (ambient.max_rate_K_per_h() > ambient.rate_cap_K_per_h * (1.0 + 1e-12))
      fail(ErrorCode::input, "ambient drift exceeds its rate cap");
    if (static_cast<std::size_t>(true_model.config().max_sensor()) > nodes.size())
      fail(ErrorCode::config, "true model references a sensor the plant does not have");
    if (beam_sigma_um < 0.0 || vibration_sigma_um < 0.0)
      fail(ErrorCode::input, "noise levels must be non-negative");
  }
};

/// Integrates dT/dt = -(T - T_amb)/tau + (h/tau) u with explicit Euler at the
/// motion sample period. Every node starts in equilibrium with the ambient and
/// the output is relative to t = 0.
inline std::vector<TimeSeries> simulate_thermals(const ThermalPlantSpec& plant, const MotionProfile& motion) {
  plant.check();
  const double dt = motion.setpoint.dt();
  const std::size_t n = motion.setpoint.size();
  if (motion.heating.size() != n)
    fail(ErrorCode::input, "heating input and setpoint differ in length");
  double tau_min = std::numeric_limits<double>::infinity();
  for (const auto& node : plant.nodes)
    tau_min = std::min(tau_min, node.tau_s);
  if (dt >= tau_min / 2.0)
    fail(ErrorCode::stability, "sample period " + std::to_string(dt) + " s is not below half the smallest time constant");

  std::vector<TimeSeries> out;
  out.reserve(plant.nodes.size());
  for (const auto& node : plant.nodes) {
    std::vector<double> rel(n);
    const double T0 = plant.ambient.at(motion.setpoint.t0());
    double T = T0;
    for (std::size_t k = 0; k < n; ++k) {
      rel[k] = T - T0;
      const double t = motion.setpoint.time_at(k);
      T += dt * (-(T - plant.ambient.at(t)) / node.tau_s + node.gain_K / node.tau_s * motion.heating[k]);
    }
    out.emplace_back(motion.setpoint.t0(), dt, std::move(rel), Unit::kelvin);
  }
  return out;
}

/// Noise model of the interferometer.
struct BeamModel {
  double sigma_um = 0.0;
  std::array<double, 3> offsets_um{0.0, 0.0, 0.0};
  double vibration_sigma_um = 0.0;
};

/// Measured expansion: ground truth plus the mean error of three beams, each
/// reading truth + offset + N(0, sigma^2), zero-referenced at the first valid
/// sample. Validity is copied from the motion mask.
inline TimeSeries observe_expansion(const ExpansionModel& true_model, const TimeSeries& q,
                                    std::span<const TimeSeries> delta_T, const BeamModel& beams, Rng& rng) {
  const std::size_t n = q.size();
  for (const auto& col : delta_T)
    if (col.size() != n || col.dt() != q.dt())
      fail(ErrorCode::input, "temperature traces are not aligned with the motion trace");
  std::vector<double> dT(delta_T.size());
  std::vector<double> measured(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t s = 0; s < delta_T.size(); ++s)
      dT[s] = delta_T[s][k];
    const double truth = predict_expansion(true_model, q[k], dT);
    double err = 0.0;
    for (double off : beams.offsets_um)
      err += off + beams.sigma_um * rng.normal();
    const double vib = beams.vibration_sigma_um * rng.normal();
    measured[k] = truth + err / 3.0 + (q.is_valid(k) ? 0.0 : vib);
  }
  std::vector<std::uint8_t> valid(q.valid().begin(), q.valid().end());
  const auto first = std::find(valid.begin(), valid.end(), std::uint8_t{1});
  if (first != valid.end()) {
    const double ref = measured[static_cast<std::size_t>(first - valid.begin())];
    for (auto& m : measured)
      m -= ref;
  }
  return TimeSeries(q.t0(), q.dt(), std::move(measured), std::move(valid), Unit::micrometre);
}

inline ScenarioDataset assemble_dataset(const TimeSeries& motion, std::span<const TimeSeries> thermals,
                                        const TimeSeries& expansion, double q0_mm, std::string id,
                                        double stroke_mm = kDefaultStrokeMm) {
  const std::size_t n = motion.size();
  if (motion.unit() != Unit::millimetre || expansion.unit() != Unit::micrometre)
    fail(ErrorCode::input, "motion must be in mm and expansion in um");
  if (expansion.size() != n || expansion.dt() != motion.dt())
    fail(ErrorCode::input, "expansion trace is not aligned with the motion trace");
  std::vector<std::vector<double>> dT;
  std::vector<std::uint8_t> valid(n);
  for (std::size_t k = 0; k < n; ++k)
    valid[k] = motion.is_valid(k) && expansion.is_valid(k);
  for (const auto& col : thermals) {
    if (col.unit() != Unit::kelvin || col.size() != n || col.dt() != motion.dt())
      fail(ErrorCode::input, "temperature trace is not aligned with the motion trace");
    for (std::size_t k = 0; k < n; ++k)
      valid[k] = valid[k] && col.is_valid(k);
    dT.emplace_back(col.values().begin(), col.values().end());
  }
  // temperatures are relative to t0; the dataset is referenced at its first valid sample
  const auto first = std::find(valid.begin(), valid.end(), std::uint8_t{1});
  if (first != valid.end()) {
    const auto k0 = static_cast<std::size_t>(first - valid.begin());
    for (auto& col : dT) {
      const double ref = col[k0];
      for (auto& v : col)
        v -= ref;
    }
  }
  std::vector<double> time(n);
  for (std::size_t k = 0; k < n; ++k)
    time[k] = static_cast<double>(k) * motion.dt();
  return ScenarioDataset(std::move(id), q0_mm, std::move(time),
                         std::vector<double>(motion.values().begin(), motion.values().end()), std::move(dT),
                         std::vector<double>(expansion.values().begin(), expansion.values().end()), std::move(valid),
                         stroke_mm);
}

/// Runs motion, thermal and observation stages for one scenario.
inline ScenarioDataset simulate_scenario(const ScenarioSpec& spec, const ThermalPlantSpec& plant, double q0_mm,
                                         std::uint64_t seed, std::string id) {
  const auto motion = generate_motion(spec);
  const auto thermals = simulate_thermals(plant, motion);
  Rng rng(seed);
  const ExpansionModel truth = plant.true_model.with_q0(q0_mm);
  const auto measured = observe_expansion(
      truth, motion.setpoint, thermals, {plant.beam_sigma_um, plant.beam_offsets_um, plant.vibration_sigma_um}, rng);
  return assemble_dataset(motion.setpoint, thermals, measured, q0_mm, std::move(id), spec.stroke_mm);
}

// ---------------------------------------------------------------------------
// Reference bench

/// Leg with `n` thermocouples spread from the motor end (id 1) to the top
/// joint (id n). Node `lower` heats fast and strongly, node `upper` slowly;
/// the others blend the two responses with their own time constants so no
/// two columns are collinear. The true expansion follows the (lower, upper)
/// pair with the supplied coefficients.
inline ThermalPlantSpec make_reference_plant(int n = 17, int lower = 4, int upper = 14,
                                             std::array<SensorCoefficients, 2> truth = {
                                                 SensorCoefficients{4, 1.2e-3, 0.6e-3},
                                                 SensorCoefficients{14, 0.8e-3, 0.5e-3}}) {
  if (n < 2 || lower < 1 || upper < 1 || lower > n || upper > n || lower == upper)
    fail(ErrorCode::input, "reference plant needs two distinct dominant nodes within range");
  std::vector<ThermalNode> nodes(static_cast<std::size_t>(n));
  for (int id = 1; id <= n; ++id) {
    // position along the leg in [0, 1]: 0 at the motor, 1 at the top joint
    const double x = n == 1 ? 0.0 : static_cast<double>(id - 1) / static_cast<double>(n - 1);
    auto& node = nodes[static_cast<std::size_t>(id - 1)];
    node.tau_s = 500.0 * std::pow(6.0, x) * (1.0 + 0.07 * std::sin(3.1 * id));
    node.gain_K = 6.0 * std::exp(-1.6 * x) * (1.0 + 0.05 * std::cos(2.3 * id));
  }
  nodes[static_cast<std::size_t>(lower - 1)] = {600.0, 6.0};
  nodes[static_cast<std::size_t>(upper - 1)] = {2400.0, 2.5};
  truth[0].sensor = lower;
  truth[1].sensor = upper;
  AmbientDrift ambient{0.5, 6.0 * 3600.0, 0.3, 1.0};
  return ThermalPlantSpec{std::move(nodes), ambient,
                          ExpansionModel({truth[0], truth[1]}, kDefaultQ0Mm),
                          0.1,
                          {0.05, -0.03, 0.02},
                          0.5};
}

/// Duty cycle of the kind used on the bench: heating bursts visiting several
/// rod positions, separated by long rests. `variant` shuffles targets and
/// durations so training and validation scenarios differ.
inline ScenarioSpec make_duty_cycle_scenario(int variant, double sample_dt_s = 1.0) {
  ScenarioSpec spec;
  spec.sample_dt_s = sample_dt_s;
  const std::array<double, 8> targets{40.0, 180.0, 90.0, 230.0, 20.0, 150.0, 110.0, 60.0};
  const int bursts = 3 + variant % 2;
  spec.phases.push_back({PhaseKind::rest, 120.0, 0.0});
  for (int b = 0; b < bursts; ++b) {
    for (int m = 0; m < 3; ++m) {
      const double target = targets[static_cast<std::size_t>((variant * 3 + b * 5 + m * 3) % 8)];
      spec.phases.push_back({PhaseKind::movement, 420.0 + 60.0 * ((variant + b + m) % 4), target});
    }
    spec.phases.push_back({PhaseKind::rest, 1200.0 + 300.0 * ((variant + b) % 3), 0.0});
  }
  return spec;
}

} // namespace thermocal
