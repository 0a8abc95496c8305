#pragma once

// Dataset CSV reading and writing, raw multi-rate channel ingestion, grid
// alignment with the t = 0 zero reference, and atomic file output.
//
// Dataset CSV layout (UTF-8, decimal point, no thousands separator):
//
//   # dataset_id: <tag>          optional metadata lines
//   # q0_mm: <value>
//   # stroke_mm: <value>
//   time_s,q_mm,valid,dq_um,dT01_K,...,dTNN_K
//
// Numbers are written as the shortest decimal that round-trips to the same
// double, so load(write(x)) == x bit for bit.

#include "thermocal/core.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace thermocal {

// ---------------------------------------------------------------------------
// Numbers

inline std::string format_double(double v) {
  if (v == 0.0)
    return std::signbit(v) ? "-0" : "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    fail(ErrorCode::input, "not a finite number: '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorCode::input, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string two_digit(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", id);
  return buf;
}

} // namespace detail

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      fail(ErrorCode::input, "cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      fail(ErrorCode::input, "write to '" + path.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::input, "cannot move output into place at '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------
// Dataset CSV

inline std::string temperature_column_name(int sensor_id) { return "dT" + detail::two_digit(sensor_id) + "_K"; }

inline std::string dataset_to_csv(const ScenarioDataset& ds) {
  std::string out;
  out.reserve(ds.size() * (32 + 12 * static_cast<std::size_t>(ds.n_sensors())));
  out += "# dataset_id: " + ds.id() + "\n";
  out += "# q0_mm: " + format_double(ds.q0_mm()) + "\n";
  out += "# stroke_mm: " + format_double(ds.stroke_mm()) + "\n";
  out += "time_s,q_mm,valid,dq_um";
  for (int s = 1; s <= ds.n_sensors(); ++s)
    out += "," + temperature_column_name(s);
  out += "\n";
  for (std::size_t k = 0; k < ds.size(); ++k) {
    out += format_double(ds.time_s()[k]);
    out += ',';
    out += format_double(ds.q_mm()[k]);
    out += ds.is_valid(k) ? ",1," : ",0,";
    out += format_double(ds.delta_q_um()[k]);
    for (int s = 1; s <= ds.n_sensors(); ++s) {
      out += ',';
      out += format_double(ds.delta_T_K(s)[k]);
    }
    out += '\n';
  }
  return out;
}

inline void write_dataset(const std::filesystem::path& path, const ScenarioDataset& ds) {
  atomic_write(path, dataset_to_csv(ds));
}

// ---------------------------------------------------------------------------
// Raw channels

enum class ChannelKind { position, expansion, temperature };

/// One channel as recorded, in canonical units, with its own timestamps.
struct RawChannel {
  std::string name;
  ChannelKind kind = ChannelKind::position;
  int sensor = 0; // temperature channels only
  std::vector<double> time_s;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
};

struct RawRecording {
  std::optional<std::string> id;
  std::optional<double> q0_mm;
  std::optional<double> stroke_mm;
  std::vector<RawChannel> channels;
};

namespace detail {

struct ColumnSpec {
  ChannelKind kind;
  int sensor;
  double scale;
  double offset;
};

/// Parses `<base>_<unit>` column headers. Lengths convert to mm (position) or
/// um (expansion), temperatures to K.
inline ColumnSpec parse_column(std::string_view header) {
  const auto us = header.rfind('_');
  if (us == std::string_view::npos)
    fail(ErrorCode::input, "column '" + std::string(header) + "' lacks a unit suffix");
  const auto base = header.substr(0, us);
  const auto unit = header.substr(us + 1);
  auto length_scale_um = [&](std::string_view u) -> double {
    if (u == "m") return 1e6;
    if (u == "mm") return 1e3;
    if (u == "um") return 1.0;
    if (u == "nm") return 1e-3;
    fail(ErrorCode::input, "unknown unit '" + std::string(u) + "' in column '" + std::string(header) + "'");
  };
  if (base == "q")
    return {ChannelKind::position, 0, length_scale_um(unit) / 1e3, 0.0};
  if (base == "dq")
    return {ChannelKind::expansion, 0, length_scale_um(unit), 0.0};
  std::string_view digits;
  if (base.starts_with("dT"))
    digits = base.substr(2);
  else if (base.starts_with("T"))
    digits = base.substr(1);
  if (!digits.empty()) {
    int id = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), id);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size() || id < 1)
      fail(ErrorCode::input, "bad sensor id in column '" + std::string(header) + "'");
    if (unit == "K")
      return {ChannelKind::temperature, id, 1.0, 0.0};
    if (unit == "mK")
      return {ChannelKind::temperature, id, 1e-3, 0.0};
    if (unit == "C" && base.starts_with("T"))
      return {ChannelKind::temperature, id, 1.0, 273.15};
    fail(ErrorCode::input, "unknown unit '" + std::string(unit) + "' in column '" + std::string(header) + "'");
  }
  fail(ErrorCode::input, "unrecognised column '" + std::string(header) + "'");
}

inline void parse_metadata(std::string_view line, RawRecording& rec) {
  line.remove_prefix(1);
  const auto colon = line.find(':');
  if (colon == std::string_view::npos)
    return;
  const auto key = trim(line.substr(0, colon));
  const auto value = trim(line.substr(colon + 1));
  if (key == "dataset_id")
    rec.id = std::string(value);
  else if (key == "q0_mm")
    rec.q0_mm = parse_double(value);
  else if (key == "stroke_mm")
    rec.stroke_mm = parse_double(value);
}

} // namespace detail

/// Parses a wide CSV of channels. The first column is `time_s`; an optional
/// `valid` column flags whole rows; an empty cell means the channel has no
/// sample at that timestamp, which is how multi-rate recordings are stored.
inline RawRecording parse_raw_channels(std::string_view text, const std::string& origin = "<memory>") {
  RawRecording rec;
  std::vector<detail::ColumnSpec> specs;
  std::vector<int> channel_of_column; // -1: time / valid
  int valid_column = -1;
  bool have_header = false;
  std::size_t line_no = 0;
  double last_time = -std::numeric_limits<double>::infinity();

  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    auto line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty())
      continue;
    if (line.front() == '#') {
      if (!have_header)
        detail::parse_metadata(line, rec);
      continue;
    }
    const auto cells = detail::split_csv(line);
    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    if (!have_header) {
      if (cells.empty() || detail::trim(cells[0]) != "time_s")
        fail(ErrorCode::input, where() + ": first column must be time_s");
      bool seen_q = false, seen_dq = false;
      std::map<int, std::string> sensors;
      channel_of_column.assign(cells.size(), -1);
      for (std::size_t c = 1; c < cells.size(); ++c) {
        const auto name = detail::trim(cells[c]);
        if (name == "valid") {
          valid_column = static_cast<int>(c);
          continue;
        }
        const auto spec = detail::parse_column(name);
        if (spec.kind == ChannelKind::temperature) {
          if (!sensors.emplace(spec.sensor, std::string(name)).second)
            fail(ErrorCode::input, where() + ": duplicate sensor id " + std::to_string(spec.sensor) + " ('" +
                                       sensors[spec.sensor] + "', '" + std::string(name) + "')");
        } else if (spec.kind == ChannelKind::position) {
          if (std::exchange(seen_q, true))
            fail(ErrorCode::input, where() + ": duplicate position channel");
        } else if (std::exchange(seen_dq, true)) {
          fail(ErrorCode::input, where() + ": duplicate expansion channel");
        }
        channel_of_column[c] = static_cast<int>(rec.channels.size());
        specs.push_back(spec);
        RawChannel ch;
        ch.name = std::string(name);
        ch.kind = spec.kind;
        ch.sensor = spec.sensor;
        rec.channels.push_back(std::move(ch));
      }
      have_header = true;
      continue;
    }
    if (cells.size() != channel_of_column.size())
      fail(ErrorCode::input, where() + ": expected " + std::to_string(channel_of_column.size()) + " cells");
    const double t = parse_double(cells[0]);
    if (!(t > last_time))
      fail(ErrorCode::input, where() + ": timestamps are not strictly increasing");
    last_time = t;
    std::uint8_t row_valid = 1;
    if (valid_column >= 0) {
      const auto v = detail::trim(cells[static_cast<std::size_t>(valid_column)]);
      if (v == "1")
        row_valid = 1;
      else if (v == "0")
        row_valid = 0;
      else
        fail(ErrorCode::input, where() + ": valid must be 0 or 1");
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const int ch = channel_of_column[c];
      if (ch < 0)
        continue;
      const auto cell = detail::trim(cells[c]);
      if (cell.empty())
        continue;
      const auto& spec = specs[static_cast<std::size_t>(ch)];
      auto& channel = rec.channels[static_cast<std::size_t>(ch)];
      channel.time_s.push_back(t);
      channel.values.push_back(parse_double(cell) * spec.scale + spec.offset);
      channel.valid.push_back(row_valid);
    }
  }
  if (!have_header)
    fail(ErrorCode::input, origin + ": no header row");
  return rec;
}

inline RawRecording load_raw_channels(const std::filesystem::path& path) {
  return parse_raw_channels(detail::read_file(path), path.string());
}

struct AlignOptions {
  std::optional<std::string> id;      // overrides the recording's tag
  std::optional<double> q0_mm;        // overrides the recording's q0
  std::optional<double> stroke_mm;    // overrides the recording's stroke
};

namespace detail {

/// Linear interpolation with a monotone cursor. Returns the value and whether
/// every sample contributing to it is valid.
struct Interpolator {
  const RawChannel& ch;
  std::size_t i = 0;

  std::pair<double, bool> at(double t) {
    const auto& ts = ch.time_s;
    while (i + 1 < ts.size() && ts[i + 1] <= t)
      ++i;
    if (ts[i] == t)
      return {ch.values[i], ch.valid[i] != 0};
    const std::size_t j = i + 1;
    const double w = (t - ts[i]) / (ts[j] - ts[i]);
    return {ch.values[i] + (ch.values[j] - ch.values[i]) * w, ch.valid[i] != 0 && ch.valid[j] != 0};
  }
};

} // namespace detail

/// Resamples every channel onto a uniform grid over the common overlap window
/// and shifts temperature and expansion channels so that the first valid grid
/// sample is exactly zero. A grid sample is valid only when every channel is
/// valid at all samples contributing to it.
inline ScenarioDataset align_and_zero(const RawRecording& rec, double grid_dt_s, const AlignOptions& opts = {}) {
  if (!(grid_dt_s > 0.0))
    fail(ErrorCode::input, "grid period must be positive");
  const RawChannel* position = nullptr;
  const RawChannel* expansion = nullptr;
  std::map<int, const RawChannel*> temperatures;
  double t_start = -std::numeric_limits<double>::infinity();
  double t_end = std::numeric_limits<double>::infinity();
  for (const auto& ch : rec.channels) {
    if (ch.time_s.empty())
      fail(ErrorCode::input, "channel '" + ch.name + "' has no samples");
    t_start = std::max(t_start, ch.time_s.front());
    t_end = std::min(t_end, ch.time_s.back());
    switch (ch.kind) {
    case ChannelKind::position: position = &ch; break;
    case ChannelKind::expansion: expansion = &ch; break;
    case ChannelKind::temperature: temperatures[ch.sensor] = &ch; break;
    }
  }
  if (!position || !expansion || temperatures.empty())
    fail(ErrorCode::input, "recording needs q, dq and at least one temperature channel");
  const int n_sensors = temperatures.rbegin()->first;
  if (static_cast<int>(temperatures.size()) != n_sensors)
    fail(ErrorCode::input, "temperature sensor ids must be contiguous from 1");
  if (!(t_end >= t_start))
    fail(ErrorCode::input, "channels share no common time window");

  const auto n = static_cast<std::size_t>(std::floor((t_end - t_start) / grid_dt_s + 1e-9)) + 1;
  std::vector<double> time(n), q(n), dq(n);
  std::vector<std::vector<double>> dT(static_cast<std::size_t>(n_sensors), std::vector<double>(n));
  std::vector<std::uint8_t> valid(n);

  detail::Interpolator ip{*position};
  detail::Interpolator ie{*expansion};
  std::vector<detail::Interpolator> it;
  for (const auto& [id, ch] : temperatures)
    it.push_back({*ch});
  for (std::size_t k = 0; k < n; ++k) {
    const double rel = static_cast<double>(k) * grid_dt_s;
    const double t = std::min(t_start + rel, t_end);
    time[k] = rel;
    bool ok = true;
    auto [qv, qok] = ip.at(t);
    auto [ev, eok] = ie.at(t);
    q[k] = qv;
    dq[k] = ev;
    ok = qok && eok;
    for (std::size_t s = 0; s < it.size(); ++s) {
      auto [tv, tok] = it[s].at(t);
      dT[s][k] = tv;
      ok = ok && tok;
    }
    valid[k] = ok ? 1 : 0;
  }

  const auto first = std::find(valid.begin(), valid.end(), std::uint8_t{1});
  if (first == valid.end())
    fail(ErrorCode::input, "no valid sample after alignment");
  const auto k0 = static_cast<std::size_t>(first - valid.begin());
  const double dq0 = dq[k0];
  for (auto& v : dq)
    v -= dq0;
  for (auto& col : dT) {
    const double ref = col[k0];
    for (auto& v : col)
      v -= ref;
  }

  std::string id = opts.id.value_or(rec.id.value_or("unnamed"));
  const double q0 = opts.q0_mm.value_or(rec.q0_mm.value_or(kDefaultQ0Mm));
  const double stroke = opts.stroke_mm.value_or(rec.stroke_mm.value_or(kDefaultStrokeMm));
  return ScenarioDataset(std::move(id), q0, std::move(time), std::move(q), std::move(dT), std::move(dq),
                         std::move(valid), stroke);
}

/// Strict reader for the dataset CSV written by write_dataset.
inline ScenarioDataset parse_dataset(std::string_view text, const std::string& origin = "<memory>",
                                     const AlignOptions& opts = {}) {
  RawRecording meta;
  std::vector<double> time, q, dq;
  std::vector<std::uint8_t> valid;
  std::vector<std::vector<double>> dT;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    auto line = detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty())
      continue;
    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    if (line.front() == '#') {
      if (!have_header)
        detail::parse_metadata(line, meta);
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (!have_header) {
      if (cells.size() < 5 || detail::trim(cells[0]) != "time_s" || detail::trim(cells[1]) != "q_mm" ||
          detail::trim(cells[2]) != "valid" || detail::trim(cells[3]) != "dq_um")
        fail(ErrorCode::input, where() + ": header must start with time_s,q_mm,valid,dq_um");
      for (std::size_t c = 4; c < cells.size(); ++c) {
        const auto spec = detail::parse_column(detail::trim(cells[c]));
        if (spec.kind != ChannelKind::temperature || spec.scale != 1.0 || spec.offset != 0.0 ||
            spec.sensor != static_cast<int>(c) - 3)
          fail(ErrorCode::input, where() + ": temperature columns must be dT01_K, dT02_K, ... in order");
      }
      dT.resize(cells.size() - 4);
      have_header = true;
      continue;
    }
    if (cells.size() != dT.size() + 4)
      fail(ErrorCode::input, where() + ": expected " + std::to_string(dT.size() + 4) + " cells");
    time.push_back(parse_double(cells[0]));
    q.push_back(parse_double(cells[1]));
    const auto v = detail::trim(cells[2]);
    if (v != "0" && v != "1")
      fail(ErrorCode::input, where() + ": valid must be 0 or 1");
    valid.push_back(v == "1" ? 1 : 0);
    dq.push_back(parse_double(cells[3]));
    for (std::size_t s = 0; s < dT.size(); ++s)
      dT[s].push_back(parse_double(cells[s + 4]));
  }
  if (!have_header)
    fail(ErrorCode::input, origin + ": no header row");
  std::string id = opts.id.value_or(meta.id.value_or(origin));
  const double q0 = opts.q0_mm.value_or(meta.q0_mm.value_or(kDefaultQ0Mm));
  const double stroke = opts.stroke_mm.value_or(meta.stroke_mm.value_or(kDefaultStrokeMm));
  return ScenarioDataset(std::move(id), q0, std::move(time), std::move(q), std::move(dT), std::move(dq),
                         std::move(valid), stroke);
}

inline ScenarioDataset read_dataset(const std::filesystem::path& path, const AlignOptions& opts = {}) {
  return parse_dataset(detail::read_file(path), path.stem().string(), opts);
}

} // namespace thermocal
