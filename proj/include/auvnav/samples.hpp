#pragma once

#include <array>

#include "auvnav/core.hpp"

namespace auvnav {

/// One IMU record. The sample stamped `t` holds over the interval that ends at
/// `t` and starts at the previous sample time (zero-order hold).
struct ImuSample {
  double t = 0.0;
  Vec3 specific_force_b = Vec3::Zero();  // m/s^2
  Vec3 angular_rate_b = Vec3::Zero();    // rad/s
};

/// Raw along-beam velocities. Invalid beams carry no usable value.
struct DvlBeamSample {
  double t = 0.0;
  std::array<double, 4> beam_velocity{};
  std::array<bool, 4> valid{true, true, true, true};

  int valid_count() const {
    int n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
  }
};

struct GnssVelocitySample {
  double t = 0.0;
  Vec3 v_n = Vec3::Zero();
  double noise_std = 0.0;
};

}  // namespace auvnav
