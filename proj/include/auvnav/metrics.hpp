#pragma once

#include <span>

#include "auvnav/core.hpp"

namespace auvnav {

struct TrajectoryMetrics {
  double prmse = 0.0;  // m
  double mate = 0.0;   // m
  double tde = 0.0;    // percent
  double fde = 0.0;    // m
};

/// Position errors in meters (north/east, plus down unless `horizontal_only`)
/// from local curvature radii at the truth position. TDE averages
/// error / travelled path over epochs whose path reaches 1 m.
TrajectoryMetrics evaluate_trajectory(std::span<const NavState> estimated,
                                      std::span<const NavState> truth,
                                      bool horizontal_only = true);

/// RMS over roll, pitch and yaw of the cyclic angle errors, in degrees.
double evaluate_mounting(const RotationMatrix& estimated, const RotationMatrix& truth);

}  // namespace auvnav
