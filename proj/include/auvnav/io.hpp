#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "auvnav/core.hpp"
#include "auvnav/samples.hpp"

namespace auvnav {

// Header-exact CSV schemas.
inline constexpr const char* kImuHeader = "t,fx,fy,fz,wx,wy,wz";
inline constexpr const char* kDvlBeamsHeader = "t,y1,y2,y3,y4,v1,v2,v3,v4";
inline constexpr const char* kGnssVelocityHeader = "t,vn,ve,vd";
inline constexpr const char* kNavStateHeader = "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw";
inline constexpr const char* kReportHeader = "metric,value,unit";

/// Receives non-fatal import diagnostics (extra columns). Defaults to stderr.
using WarningSink = std::function<void(const std::string&)>;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

void export_imu(std::span<const ImuSample> samples, const std::string& path);
void export_dvl_beams(std::span<const DvlBeamSample> samples, const std::string& path);
void export_gnss_velocity(std::span<const GnssVelocitySample> samples, const std::string& path);
void export_nav_states(std::span<const NavState> states, const std::string& path);

std::vector<ImuSample> import_imu(const std::string& path, const WarningSink& warn = {});
std::vector<DvlBeamSample> import_dvl_beams(const std::string& path, const WarningSink& warn = {});
std::vector<GnssVelocitySample> import_gnss_velocity(const std::string& path,
                                                     const WarningSink& warn = {});
std::vector<NavState> import_nav_states(const std::string& path, const WarningSink& warn = {});

/// Minimal CSV table: header cells plus string rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
void write_csv(const CsvTable& table, const std::string& path);
void write_text(const std::string& text, const std::string& path);

}  // namespace auvnav
