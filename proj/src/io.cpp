#include "auvnav/io.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "auvnav/error.hpp"

namespace auvnav {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NavError(ErrorCode::kIo, "cannot write " + path);
  return out;
}

// Checks the schema prefix and returns the schema columns of every row as
// doubles. Timestamps in column 0 must strictly increase.
std::vector<std::vector<double>> read_numeric(const std::string& path, const char* header,
                                              const WarningSink& warn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NavError(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw NavError(ErrorCode::kSchemaMismatch, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> expected = split(header);
  const std::vector<std::string> found = split(line);
  const bool prefix_ok = found.size() >= expected.size() &&
                         std::equal(expected.begin(), expected.end(), found.begin());
  if (!prefix_ok) {
    throw NavError(ErrorCode::kSchemaMismatch,
                   path + ": expected header '" + header + "', found '" + line + "'");
  }
  if (found.size() > expected.size()) {
    const std::string msg = path + ": ignoring " + std::to_string(found.size() - expected.size()) +
                            " extra column(s)";
    if (warn) warn(msg); else std::cerr << "warning: " << msg << '\n';
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() < expected.size()) {
      throw NavError(ErrorCode::kSchemaMismatch,
                     path + ": row " + std::to_string(line_no) + " has too few columns");
    }
    std::vector<double> values(expected.size());
    for (std::size_t c = 0; c < expected.size(); ++c) {
      try {
        values[c] = parse_double(cells[c]);
      } catch (const NavError&) {
        throw NavError(ErrorCode::kSchemaMismatch, path + ": row " + std::to_string(line_no) +
                                                       " column '" + expected[c] +
                                                       "' is not a number");
      }
    }
    if (!rows.empty() && !(values[0] > rows.back()[0])) {
      throw NavError(ErrorCode::kNonMonotoneTime,
                     path + ": timestamp not increasing at row " + std::to_string(line_no));
    }
    rows.push_back(std::move(values));
  }
  return rows;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw NavError(ErrorCode::kSchemaMismatch, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

void export_imu(std::span<const ImuSample> samples, const std::string& path) {
  std::ofstream out = open_out(path);
  out << kImuHeader << '\n';
  for (const ImuSample& s : samples) {
    out << format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.specific_force_b(i));
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.angular_rate_b(i));
    out << '\n';
  }
}

void export_dvl_beams(std::span<const DvlBeamSample> samples, const std::string& path) {
  std::ofstream out = open_out(path);
  out << kDvlBeamsHeader << '\n';
  for (const DvlBeamSample& s : samples) {
    out << format_double(s.t);
    for (double y : s.beam_velocity) out << ',' << format_double(y);
    for (bool v : s.valid) out << ',' << (v ? 1 : 0);
    out << '\n';
  }
}

void export_gnss_velocity(std::span<const GnssVelocitySample> samples, const std::string& path) {
  std::ofstream out = open_out(path);
  out << kGnssVelocityHeader << '\n';
  for (const GnssVelocitySample& s : samples) {
    out << format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.v_n(i));
    out << '\n';
  }
}

void export_nav_states(std::span<const NavState> states, const std::string& path) {
  std::ofstream out = open_out(path);
  out << kNavStateHeader << '\n';
  for (const NavState& s : states) {
    const EulerAngles e = euler_from_rotation(s.attitude);
    out << format_double(s.t) << ',' << format_double(s.position.latitude) << ','
        << format_double(s.position.longitude) << ',' << format_double(s.position.height);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.velocity_n(i));
    out << ',' << format_double(e.roll) << ',' << format_double(e.pitch) << ','
        << format_double(e.yaw) << '\n';
  }
}

std::vector<ImuSample> import_imu(const std::string& path, const WarningSink& warn) {
  std::vector<ImuSample> out;
  for (const auto& r : read_numeric(path, kImuHeader, warn)) {
    out.push_back(ImuSample{r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  }
  return out;
}

std::vector<DvlBeamSample> import_dvl_beams(const std::string& path, const WarningSink& warn) {
  std::vector<DvlBeamSample> out;
  for (const auto& r : read_numeric(path, kDvlBeamsHeader, warn)) {
    DvlBeamSample s;
    s.t = r[0];
    for (std::size_t i = 0; i < 4; ++i) {
      s.beam_velocity[i] = r[1 + i];
      if (r[5 + i] != 0.0 && r[5 + i] != 1.0) {
        throw NavError(ErrorCode::kSchemaMismatch, path + ": validity flags must be 0 or 1");
      }
      s.valid[i] = r[5 + i] == 1.0;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<GnssVelocitySample> import_gnss_velocity(const std::string& path,
                                                     const WarningSink& warn) {
  std::vector<GnssVelocitySample> out;
  for (const auto& r : read_numeric(path, kGnssVelocityHeader, warn)) {
    GnssVelocitySample s;
    s.t = r[0];
    s.v_n = Vec3(r[1], r[2], r[3]);
    out.push_back(s);
  }
  return out;
}

std::vector<NavState> import_nav_states(const std::string& path, const WarningSink& warn) {
  std::vector<NavState> out;
  for (const auto& r : read_numeric(path, kNavStateHeader, warn)) {
    NavState s;
    s.t = r[0];
    s.position = GeodeticPosition{r[1], r[2], r[3]};
    s.velocity_n = Vec3(r[4], r[5], r[6]);
    s.attitude = rotation_from_euler(EulerAngles{r[7], r[8], r[9]});
    out.push_back(s);
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NavError(ErrorCode::kIo, "cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
    } else {
      table.rows.push_back(split(line));
    }
  }
  if (first) throw NavError(ErrorCode::kSchemaMismatch, path + ": empty file");
  return table;
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out = open_out(path);
  out << join(table.header) << '\n';
  for (const auto& row : table.rows) out << join(row) << '\n';
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out = open_out(path);
  out << text;
}

}  // namespace auvnav
