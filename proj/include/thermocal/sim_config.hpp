#pragma once

// JSON configuration of a simulated measurement campaign.
//
// {
//   "q0_mm": 500, "stroke_mm": 250,
//   "plant": {
//     "reference": {"n_sensors": 17, "lower": 4, "upper": 14},   // default starting point
//     "nodes": [{"tau_s": 600, "gain_K": 6}, ...],               // overrides
//     "ambient": {"amplitude_K": 0.5, "period_s": 21600, "phase_rad": 0, "rate_cap_K_per_h": 1},
//     "true_model": {"coefficients": [{"sensor": 4, "A_um_per_mm_K": 1.2e-3, "B_um_per_mm_K": 6e-4}]},
//     "beam_sigma_um": 0.1, "beam_offsets_um": [0, 0, 0], "vibration_sigma_um": 0.5
//   },
//   "scenarios": [
//     {"id": "train-01", "duty_cycle": 0},                       // generated duty cycle
//     {"id": "val-01", "phases": [{"kind": "rest", "duration_s": 60},
//                                 {"kind": "movement", "duration_s": 300, "target_q_mm": 30}],
//      "increment_mm": 10, "stabilization_s": 5, "sample_dt_s": 1, "speed_mm_per_s": 5}
//   ]
// }

#include "thermocal/report_json.hpp"
#include "thermocal/simulator.hpp"

namespace thermocal {

struct ScenarioEntry {
  std::string id;
  ScenarioSpec spec;
};

struct CampaignConfig {
  double q0_mm = kDefaultQ0Mm;
  double stroke_mm = kDefaultStrokeMm;
  ThermalPlantSpec plant;
  std::vector<ScenarioEntry> scenarios;
};

namespace detail {

inline double get_or(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? require<double>(j, key) : fallback;
}

// q0 of the ground truth comes from the campaign, so the field is optional here
inline ExpansionModel true_model_from_json(const Json& j) {
  Json m = {{"q0_mm", kDefaultQ0Mm}};
  m.update(j, true);
  return model_from_json(m);
}

inline ThermalPlantSpec plant_from_json(const Json& j) {
  if (!j.is_object())
    fail(ErrorCode::input, "plant must be an object");
  ThermalPlantSpec plant = [&] {
    if (!j.contains("reference") && j.contains("nodes") && j.contains("true_model"))
      return ThermalPlantSpec{{}, {}, true_model_from_json(j.at("true_model"))};
    const Json r = j.contains("reference") ? j.at("reference") : Json::object();
    return make_reference_plant(static_cast<int>(get_or(r, "n_sensors", 17)), static_cast<int>(get_or(r, "lower", 4)),
                                static_cast<int>(get_or(r, "upper", 14)));
  }();
  if (j.contains("nodes")) {
    plant.nodes.clear();
    for (const auto& n : j.at("nodes"))
      plant.nodes.push_back({require<double>(n, "tau_s"), require<double>(n, "gain_K")});
  }
  if (j.contains("ambient")) {
    const auto& a = j.at("ambient");
    plant.ambient.amplitude_K = get_or(a, "amplitude_K", plant.ambient.amplitude_K);
    plant.ambient.period_s = get_or(a, "period_s", plant.ambient.period_s);
    plant.ambient.phase_rad = get_or(a, "phase_rad", plant.ambient.phase_rad);
    plant.ambient.rate_cap_K_per_h = get_or(a, "rate_cap_K_per_h", plant.ambient.rate_cap_K_per_h);
  }
  if (j.contains("true_model"))
    plant.true_model = true_model_from_json(j.at("true_model"));
  plant.beam_sigma_um = get_or(j, "beam_sigma_um", plant.beam_sigma_um);
  if (j.contains("beam_offsets_um")) {
    const auto off = require<std::vector<double>>(j, "beam_offsets_um");
    if (off.size() != 3)
      fail(ErrorCode::input, "beam_offsets_um lists exactly three beams");
    plant.beam_offsets_um = {off[0], off[1], off[2]};
  }
  plant.vibration_sigma_um = get_or(j, "vibration_sigma_um", plant.vibration_sigma_um);
  plant.check();
  return plant;
}

inline ScenarioSpec scenario_from_json(const Json& j) {
  ScenarioSpec spec;
  if (j.contains("duty_cycle")) {
    spec = make_duty_cycle_scenario(require<int>(j, "duty_cycle"));
  } else {
    if (!j.contains("phases") || !j.at("phases").is_array())
      fail(ErrorCode::input, "scenario needs phases or a duty_cycle variant");
    for (const auto& p : j.at("phases")) {
      const auto kind = require<std::string>(p, "kind");
      Phase phase;
      if (kind == "movement") {
        phase.kind = PhaseKind::movement;
        phase.target_q_mm = require<double>(p, "target_q_mm");
      } else if (kind == "rest") {
        phase.kind = PhaseKind::rest;
      } else {
        fail(ErrorCode::input, "phase kind must be movement or rest");
      }
      phase.duration_s = require<double>(p, "duration_s");
      spec.phases.push_back(phase);
    }
  }
  spec.increment_mm = get_or(j, "increment_mm", spec.increment_mm);
  spec.stabilization_s = get_or(j, "stabilization_s", spec.stabilization_s);
  spec.sample_dt_s = get_or(j, "sample_dt_s", spec.sample_dt_s);
  spec.speed_mm_per_s = get_or(j, "speed_mm_per_s", spec.speed_mm_per_s);
  spec.start_q_mm = get_or(j, "start_q_mm", spec.start_q_mm);
  return spec;
}

} // namespace detail

inline CampaignConfig campaign_from_json(const Json& j) {
  if (!j.is_object())
    fail(ErrorCode::input, "campaign config must be a JSON object");
  CampaignConfig cfg{detail::get_or(j, "q0_mm", kDefaultQ0Mm), detail::get_or(j, "stroke_mm", kDefaultStrokeMm),
                     detail::plant_from_json(j.contains("plant") ? j.at("plant") : Json::object()), {}};
  if (!j.contains("scenarios") || !j.at("scenarios").is_array() || j.at("scenarios").empty())
    fail(ErrorCode::input, "campaign config needs a non-empty scenarios array");
  std::set<std::string> seen;
  for (const auto& s : j.at("scenarios")) {
    auto id = detail::require<std::string>(s, "id");
    if (!seen.insert(id).second)
      fail(ErrorCode::input, "duplicate scenario id '" + id + "'");
    auto spec = detail::scenario_from_json(s);
    spec.stroke_mm = cfg.stroke_mm;
    cfg.scenarios.push_back({std::move(id), std::move(spec)});
  }
  return cfg;
}

inline CampaignConfig read_campaign(const std::filesystem::path& path) {
  try {
    return campaign_from_json(Json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::input, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Simulates every scenario of the campaign; scenario k uses derive_seed(seed, k).
inline std::vector<ScenarioDataset> simulate_campaign(const CampaignConfig& cfg, std::uint64_t seed) {
  std::vector<ScenarioDataset> out;
  for (std::size_t k = 0; k < cfg.scenarios.size(); ++k)
    out.push_back(simulate_scenario(cfg.scenarios[k].spec, cfg.plant, cfg.q0_mm, derive_seed(seed, k),
                                    cfg.scenarios[k].id));
  return out;
}

} // namespace thermocal
