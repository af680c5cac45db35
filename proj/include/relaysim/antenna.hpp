#pragma once

// Uniform planar arrays, element radiation pattern, steering vectors and
// beam codebooks.
//
// Array frame: boresight is the local +x axis, columns run along local +y
// (horizontal) and rows along local +z (vertical). Element (r, c) sits at
// (0, c * spacing, r * spacing) wavelengths and has flat index r * cols_h + c.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaysim/error.hpp"
#include "relaysim/geometry.hpp"
#include "relaysim/units.hpp"

namespace relaysim {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Parabolic-in-dB element pattern (3GPP TR 38.901 Table 7.3-1 form).
struct ElementPattern {
  double max_gain_dbi = 8.0;
  double hpbw_az_deg = 65.0;
  double hpbw_zen_deg = 65.0;
  double sla_db = 30.0;
  double a_max_db = 30.0;
  bool isotropic = false;

  static ElementPattern iso() {
    ElementPattern p;
    p.max_gain_dbi = 0.0;
    p.isotropic = true;
    return p;
  }
  static ElementPattern tr38901() { return {}; }
};

/// Gain in dBi at local angles (azimuth from boresight, zenith from local +z).
inline double element_gain_db(const ElementPattern& p, double az, double zen) {
  if (p.isotropic) return 0.0;
  const double az_deg = rad_to_deg(wrap_angle(az));
  const double zen_deg = rad_to_deg(zen);
  const double a_v = -std::min(12.0 * std::pow((zen_deg - 90.0) / p.hpbw_zen_deg, 2), p.sla_db);
  const double a_h = -std::min(12.0 * std::pow(az_deg / p.hpbw_az_deg, 2), p.a_max_db);
  return p.max_gain_dbi - std::min(-(a_v + a_h), p.a_max_db);
}

/// Field amplitude (square root of linear power gain).
inline double element_field(const ElementPattern& p, double az, double zen) {
  return std::pow(10.0, element_gain_db(p, az, zen) / 20.0);
}

struct ArrayGeometry {
  int rows_v = 1;
  int cols_h = 1;
  double spacing = 0.5;  // wavelengths
  double boresight_az = 0.0;
  double boresight_zen = kPi / 2;
  ElementPattern element = ElementPattern::iso();

  std::size_t size() const { return static_cast<std::size_t>(rows_v) * cols_h; }

  void validate() const {
    if (rows_v < 1 || cols_h < 1) throw ConfigError("array: rows_v and cols_h must be >= 1");
    if (!(spacing > 0.0)) throw ConfigError("array: spacing_wl must be > 0");
    if (size() > (std::size_t{1} << 16)) throw ConfigError("array: more than 2^16 elements");
  }

  /// Orthonormal local frame {boresight, horizontal, vertical} in global coordinates.
  std::array<Vec3, 3> frame() const {
    const double ca = std::cos(boresight_az), sa = std::sin(boresight_az);
    const double cz = std::cos(boresight_zen), sz = std::sin(boresight_zen);
    const Vec3 x{sz * ca, sz * sa, cz};
    const Vec3 y{-sa, ca, 0.0};
    return {x, y, cross(x, y)};
  }

  Vec3 to_local(const Vec3& global_dir) const {
    const auto f = frame();
    return {dot(global_dir, f[0]), dot(global_dir, f[1]), dot(global_dir, f[2])};
  }
};

/// Local angles of a global direction as seen by `geom`.
inline SphericalAngles local_angles(const ArrayGeometry& geom, const Vec3& global_dir) {
  return to_angles(geom.to_local(global_dir));
}

/// Per-axis factors of the (unnormalized) array response for a local unit
/// direction: response[r * cols + c] = vertical[r] * horizontal[c].
struct ResponseFactors {
  CVector horizontal;
  CVector vertical;
};

inline ResponseFactors response_factors(const ArrayGeometry& g, const Vec3& local_dir) {
  ResponseFactors f{CVector(g.cols_h), CVector(g.rows_v)};
  const double kh = kTwoPi * g.spacing * local_dir[1];
  const double kv = kTwoPi * g.spacing * local_dir[2];
  for (int c = 0; c < g.cols_h; ++c) f.horizontal[c] = std::polar(1.0, kh * c);
  for (int r = 0; r < g.rows_v; ++r) f.vertical[r] = std::polar(1.0, kv * r);
  return f;
}

inline CVector kron_response(const CVector& vertical, const CVector& horizontal) {
  const auto rows = vertical.size(), cols = horizontal.size();
  CVector out(rows * cols);
  for (Eigen::Index r = 0; r < rows; ++r) out.segment(r * cols, cols) = vertical[r] * horizontal;
  return out;
}

/// Unnormalized array response e^{j 2 pi d_m . u} for a local unit direction.
inline CVector array_response(const ArrayGeometry& g, const Vec3& local_dir) {
  const auto f = response_factors(g, local_dir);
  return kron_response(f.vertical, f.horizontal);
}

struct Codeword {
  CVector weights;
  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
};

/// Unit-norm steering vector towards local angles (az, zen).
inline Codeword steering_vector(const ArrayGeometry& g, double az, double zen) {
  CVector a = array_response(g, unit_direction(az, zen));
  a /= std::sqrt(static_cast<double>(a.size()));
  return {std::move(a)};
}

/// Matched beamforming weights for direction (az, zen): applied as w^T a, so
/// they are the conjugate of the steering vector.
inline Codeword beam_weights(const ArrayGeometry& g, double az, double zen) {
  Codeword w = steering_vector(g, az, zen);
  w.weights = w.weights.conjugate();
  return w;
}

/// |a(az, zen)^T w| for isotropic elements; at most sqrt(N) for unit-norm w.
inline double array_gain(const ArrayGeometry& g, const Codeword& w, double az, double zen) {
  return std::abs(array_response(g, unit_direction(az, zen)).cwiseProduct(w.weights).sum());
}

struct Codebook {
  std::vector<Codeword> codewords;
  std::vector<double> az_grid;
  std::vector<double> zen_grid;

  std::size_t size() const { return codewords.size(); }
  const Codeword& operator[](std::size_t i) const { return codewords[i]; }

  /// Codewords stacked as columns.
  CMatrix matrix() const {
    expects(!codewords.empty(), "codebook is empty");
    CMatrix m(codewords.front().weights.size(), static_cast<Eigen::Index>(codewords.size()));
    for (std::size_t i = 0; i < codewords.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = codewords[i].weights;
    return m;
  }
};

/// Beams on a uniform az x zen grid over the front hemisphere. Codeword
/// index is zen_index * n_az + az_index.
inline Codebook build_codebook(const ArrayGeometry& g, int n_az, int n_zen) {
  expects(n_az >= 1 && n_zen >= 1, "build_codebook: grid counts must be >= 1");
  Codebook cb;
  for (int i = 0; i < n_az; ++i) cb.az_grid.push_back(-kPi / 2 + kPi * (i + 0.5) / n_az);
  for (int j = 0; j < n_zen; ++j) cb.zen_grid.push_back(kPi * (j + 0.5) / n_zen);
  cb.codewords.reserve(static_cast<std::size_t>(n_az) * n_zen);
  for (double zen : cb.zen_grid)
    for (double az : cb.az_grid) cb.codewords.push_back(beam_weights(g, az, zen));
  return cb;
}

/// Default 2x oversampled grid: 2 * cols_h azimuth points, 2 * rows_v zenith points.
inline Codebook build_default_codebook(const ArrayGeometry& g, int oversampling = 2) {
  return build_codebook(g, oversampling * g.cols_h, oversampling * g.rows_v);
}

}  // namespace relaysim
