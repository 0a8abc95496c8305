#pragma once

// Command-line front end: simulate -> fit / rank -> validate -> correct.
//
// Every failure prints a single line to stderr,
//   error code=<name> exit=<n> message="<text>"
// and exits with 2 (input), 3 (degenerate data) or 4 (leakage). All outputs
// are rendered in memory first and then moved into place atomically.

#include "thermocal/thermocal.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace thermocal::app {

namespace fs = std::filesystem;

constexpr int exit_code(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::degenerate: return 3;
  case ErrorCode::leakage: return 4;
  default: return 2;
  }
}

struct CommonOptions {
  std::optional<double> q0_mm;
  std::optional<double> stroke_mm;
  std::optional<double> grid_dt_s;
  double outlier_c = 5.0;
};

inline std::vector<ScenarioDataset> load_datasets(const std::vector<std::string>& paths, const CommonOptions& common) {
  std::vector<ScenarioDataset> out;
  for (const auto& p : paths) {
    AlignOptions opts{std::nullopt, common.q0_mm, common.stroke_mm};
    if (common.grid_dt_s) {
      const auto rec = load_raw_channels(p);
      opts.id = rec.id.value_or(fs::path(p).stem().string());
      out.push_back(align_and_zero(rec, *common.grid_dt_s, opts));
    } else {
      out.push_back(read_dataset(p, opts));
    }
  }
  return out;
}

inline SensorConfig parse_sensors(const std::string& text) {
  std::vector<int> ids;
  std::string cur;
  auto flush = [&] {
    if (cur.empty())
      fail(ErrorCode::input, "bad --sensors value '" + text + "'");
    ids.push_back(static_cast<int>(parse_double(cur)));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '-')
      flush();
    else
      cur += c;
  }
  flush();
  if (ids.size() == 1)
    return SensorConfig::single(ids[0]);
  if (ids.size() == 2)
    return SensorConfig::pair(ids[0], ids[1]);
  fail(ErrorCode::input, "--sensors takes one id or a pair 'i,j'");
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    fail(ErrorCode::input, "cannot create output directory '" + dir.string() + "'");
}

/// Writes all rendered files only after every one of them was produced.
inline void commit(const std::vector<std::pair<fs::path, std::string>>& files) {
  for (const auto& [path, content] : files)
    atomic_write(path, content);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Thermal expansion calibration toolkit for telescopic actuators"};
  app.require_subcommand(1);
  CommonOptions common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--q0-mm", common.q0_mm, "Contracted inter-articular distance, mm (overrides dataset metadata)");
    sub->add_option("--stroke-mm", common.stroke_mm, "Actuator stroke, mm (default 250)");
    sub->add_option("--grid-dt-s", common.grid_dt_s,
                    "Treat inputs as raw channel CSVs and resample them onto this grid period, s");
  };

  // simulate
  std::string sim_config;
  std::uint64_t seed = 1;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic scenario datasets");
  simulate->add_option("--config", sim_config, "Campaign JSON")->required();
  simulate->add_option("--seed", seed, "Base seed");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_option("--q0-mm", common.q0_mm, "Overrides the campaign q0, mm");
  simulate->add_option("--stroke-mm", common.stroke_mm, "Overrides the campaign stroke, mm");

  // fit
  std::vector<std::string> fit_inputs;
  std::string fit_sensors;
  std::string fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "Identify the model of one sensor configuration");
  fit_cmd->add_option("datasets", fit_inputs, "Training datasets (concatenated)")->required();
  fit_cmd->add_option("--sensors", fit_sensors, "Sensor id or pair, e.g. 7 or 7,15")->required();
  fit_cmd->add_option("--out", fit_out, "Model JSON")->required();
  fit_cmd->add_option("--outlier-c", common.outlier_c, "Outlier threshold in robust sigmas; 0 disables");
  add_common(fit_cmd);

  // rank
  std::vector<std::string> rank_inputs;
  std::string rank_out;
  unsigned threads = 1;
  auto* rank = app.add_subcommand("rank", "Rank every single sensor and sensor pair");
  rank->add_option("datasets", rank_inputs, "Training datasets (concatenated)")->required();
  rank->add_option("--out", rank_out, "Output directory")->required();
  rank->add_option("--outlier-c", common.outlier_c, "Outlier threshold in robust sigmas; 0 disables");
  rank->add_option("--threads", threads, "Concurrent fits");
  add_common(rank);

  // validate
  std::string val_model;
  std::vector<std::string> val_inputs;
  std::string val_out;
  auto* validate = app.add_subcommand("validate", "Cross-validate a model on held-out datasets");
  validate->add_option("--model", val_model, "Model JSON written by fit")->required();
  validate->add_option("datasets", val_inputs, "Held-out datasets")->required();
  validate->add_option("--out", val_out, "Output directory")->required();
  add_common(validate);

  // correct
  std::string cor_model;
  std::string cor_dataset;
  std::string cor_out;
  std::size_t smoothing = 0;
  auto* correct = app.add_subcommand("correct", "Thermally correct the setpoint trace of a dataset");
  correct->add_option("--model", cor_model, "Model JSON written by fit")->required();
  correct->add_option("--dataset", cor_dataset, "Dataset with setpoint and temperatures")->required();
  correct->add_option("--out", cor_out, "Corrected setpoint CSV")->required();
  correct->add_option("--smooth", smoothing, "Trailing moving-average length on temperatures (0 = off)");
  add_common(correct);

  auto report_error = [&](std::string_view code, int exit, const std::string& message) {
    std::string flat = message;
    for (auto& c : flat)
      if (c == '\n' || c == '"')
        c = c == '"' ? '\'' : ' ';
    err << "error code=" << code << " exit=" << exit << " message=\"" << flat << "\"\n";
    return exit;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return report_error("usage_error", 2, e.what());
  }

  try {
    if (*simulate) {
      auto cfg = read_campaign(sim_config);
      if (common.q0_mm)
        cfg.q0_mm = *common.q0_mm;
      if (common.stroke_mm) {
        cfg.stroke_mm = *common.stroke_mm;
        for (auto& s : cfg.scenarios)
          s.spec.stroke_mm = cfg.stroke_mm;
      }
      const auto datasets = simulate_campaign(cfg, seed);
      ensure_directory(sim_out);
      std::vector<std::pair<fs::path, std::string>> files;
      for (const auto& ds : datasets)
        files.emplace_back(fs::path(sim_out) / (ds.id() + ".csv"), dataset_to_csv(ds));
      commit(files);
      for (const auto& [path, _] : files)
        out << path.string() << "\n";
    } else if (*fit_cmd) {
      const auto datasets = load_datasets(fit_inputs, common);
      const auto result = fit(datasets, parse_sensors(fit_sensors), OutlierPolicy{common.outlier_c});
      Json doc;
      doc["model"] = model_to_json(result.model);
      doc["fit_report"] = fit_report_to_json(result.report);
      doc["outlier_c"] = common.outlier_c;
      doc["design"] = "valid samples of all training datasets, concatenated";
      commit({{fit_out, dump(doc)}});
      out << "rmse_um=" << format_double(result.report.rmse_um) << " linf_um=" << format_double(result.report.linf_um)
          << "\n";
    } else if (*rank) {
      const auto datasets = load_datasets(rank_inputs, common);
      const auto matrices = rank_all(std::span<const ScenarioDataset>(datasets),
                                     RankOptions{OutlierPolicy{common.outlier_c}, threads});
      const auto pareto = pareto_front(matrices);
      Json doc = criteria_to_json(matrices);
      doc["pareto"] = pareto_to_json(pareto);
      if (const auto single = best_single(matrices))
        doc["best_single"] = {{"config", config_to_json(single->config)},
                              {"rmse_um", single->rmse_um},
                              {"linf_um", single->linf_um}};
      doc["training_ids"] = [&] {
        std::vector<std::string> ids;
        for (const auto& ds : datasets)
          ids.push_back(ds.id());
        return ids;
      }();
      ensure_directory(rank_out);
      commit({{fs::path(rank_out) / "criteria.json", dump(doc)},
              {fs::path(rank_out) / "cells.csv", criteria_to_csv(matrices, &pareto)}});
      for (const auto& e : pareto.front)
        out << "pareto " << e.config.label() << " rmse_um=" << format_double(e.rmse_um)
            << " linf_um=" << format_double(e.linf_um) << "\n";
    } else if (*validate) {
      auto model = read_model(val_model);
      if (common.q0_mm)
        model = model.with_q0(*common.q0_mm);
      const auto datasets = load_datasets(val_inputs, common);
      const auto report = cross_validate(model, datasets);
      std::vector<std::pair<std::string, std::vector<TraceSample>>> traces;
      for (const auto& ds : datasets)
        traces.emplace_back(ds.id(), validation_trace(model, ds));
      ensure_directory(val_out);
      commit({{fs::path(val_out) / "validation.json", dump(validation_to_json(report))},
              {fs::path(val_out) / "trace.csv", trace_to_csv(traces)}});
      const auto& p = report.pooled;
      out << "max_drift_um=" << format_double(p.max_drift_um) << " max_residual_um=" << format_double(p.max_residual_um)
          << "\n";
    } else if (*correct) {
      auto model = read_model(cor_model);
      if (common.q0_mm)
        model = model.with_q0(*common.q0_mm);
      const auto ds = load_datasets({cor_dataset}, common).front();
      BatchOptions opts;
      opts.limits.stroke_mm = common.stroke_mm.value_or(ds.stroke_mm());
      opts.smoothing_samples = smoothing;
      const auto result = batch_correct(model, ds, opts);
      std::string csv = "time_s,q_setpoint_mm,q_corrected_mm,correction_um,valid,fallback\n";
      std::size_t fallbacks = 0;
      for (std::size_t k = 0; k < ds.size(); ++k) {
        const double q_set = ds.q_mm()[k];
        const double q_cor = result.corrected[k];
        fallbacks += result.fallback[k];
        csv += format_double(ds.time_s()[k]) + "," + format_double(q_set) + "," + format_double(q_cor) + "," +
               format_double((q_cor - q_set) * 1000.0) + (ds.is_valid(k) ? ",1," : ",0,") +
               (result.fallback[k] ? "1\n" : "0\n");
      }
      commit({{cor_out, csv}});
      out << "samples=" << ds.size() << " fallbacks=" << fallbacks << "\n";
    }
  } catch (const Error& e) {
    return report_error(to_string(e.code()), exit_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error("internal_error", 2, e.what());
  }
  return 0;
}

} // namespace thermocal::app
