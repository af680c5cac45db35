#pragma once

#include <cmath>
#include <numbers>

namespace relaysim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;
/// Thermal noise density at 290 K.
inline constexpr double kThermalNoiseDbmPerHz = -174.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a - kPi;
}

/// Folds a zenith angle back into [0, pi] by reflection at the poles.
inline double fold_zenith(double z) {
  z = std::fmod(z, kTwoPi);
  if (z < 0) z += kTwoPi;
  return z > kPi ? kTwoPi - z : z;
}

/// Thermal noise power over `bandwidth_hz` with the given noise figure, in watts.
inline double thermal_noise_watt(double bandwidth_hz, double noise_figure_db) {
  return dbm_to_watt(kThermalNoiseDbmPerHz + noise_figure_db) * bandwidth_hz;
}

}  // namespace relaysim
