#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace relaysim {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Unit vector for azimuth `az` (from +x towards +y) and zenith `zen` (from +z).
inline Vec3 unit_direction(double az, double zen) {
  return {std::sin(zen) * std::cos(az), std::sin(zen) * std::sin(az), std::cos(zen)};
}

struct SphericalAngles {
  double az = 0.0;
  double zen = 0.0;
};

inline SphericalAngles to_angles(const Vec3& v) {
  const double r = norm(v);
  return {std::atan2(v[1], v[0]), std::acos(std::clamp(v[2] / r, -1.0, 1.0))};
}

}  // namespace relaysim
