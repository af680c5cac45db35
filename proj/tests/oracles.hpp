#pragma once

// Reference implementations written straight from the model formulas, with
// no shared code paths beyond plain data types. Slow on purpose.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "relaysim/relaysim.hpp"

namespace oracle {

using relaysim::Complex;
using relaysim::CMatrix;
using relaysim::CVector;

struct Frame {
  double b[3], h[3], v[3];
};

inline Frame frame_of(const relaysim::ArrayGeometry& g) {
  Frame f;
  const double az = g.boresight_az, zen = g.boresight_zen;
  f.b[0] = std::sin(zen) * std::cos(az);
  f.b[1] = std::sin(zen) * std::sin(az);
  f.b[2] = std::cos(zen);
  f.h[0] = -std::sin(az);
  f.h[1] = std::cos(az);
  f.h[2] = 0.0;
  f.v[0] = f.b[1] * f.h[2] - f.b[2] * f.h[1];
  f.v[1] = f.b[2] * f.h[0] - f.b[0] * f.h[2];
  f.v[2] = f.b[0] * f.h[1] - f.b[1] * f.h[0];
  return f;
}

inline void direction(double az, double zen, double u[3]) {
  u[0] = std::sin(zen) * std::cos(az);
  u[1] = std::sin(zen) * std::sin(az);
  u[2] = std::cos(zen);
}

/// Power pattern of the element in linear scale, evaluated from the parabolic law.
inline double element_power(const relaysim::ElementPattern& p, const Frame& f, const double u[3]) {
  if (p.isotropic) return 1.0;
  const double lx = u[0] * f.b[0] + u[1] * f.b[1] + u[2] * f.b[2];
  const double ly = u[0] * f.h[0] + u[1] * f.h[1] + u[2] * f.h[2];
  const double lz = u[0] * f.v[0] + u[1] * f.v[1] + u[2] * f.v[2];
  const double az = std::atan2(ly, lx) * 180.0 / M_PI;
  const double zen = std::acos(std::max(-1.0, std::min(1.0, lz))) * 180.0 / M_PI;
  const double av = std::min(12.0 * (zen - 90.0) * (zen - 90.0) / (p.hpbw_zen_deg * p.hpbw_zen_deg), p.sla_db);
  const double ah = std::min(12.0 * az * az / (p.hpbw_az_deg * p.hpbw_az_deg), p.a_max_db);
  const double g = p.max_gain_dbi - std::min(av + ah, p.a_max_db);
  return std::pow(10.0, g / 10.0);
}

/// Phase term e^{j 2 pi d_e . u} of element e (flat index r * cols + c).
inline Complex element_phase(const relaysim::ArrayGeometry& g, const Frame& f, int e, const double u[3]) {
  const int r = e / g.cols_h, c = e % g.cols_h;
  double d = 0.0;
  for (int k = 0; k < 3; ++k) d += g.spacing * (c * f.h[k] + r * f.v[k]) * u[k];
  return std::polar(1.0, 2.0 * M_PI * d);
}

/// H_n[q, p] as a direct sum over the rays of cluster n.
inline Complex channel_entry(const relaysim::Cluster& cl, const relaysim::ArrayGeometry& tx,
                             const relaysim::ArrayGeometry& rx, int q, int p) {
  const Frame ft = frame_of(tx), fr = frame_of(rx);
  Complex acc = 0.0;
  for (const auto& ray : cl.rays) {
    double ud[3], ua[3];
    direction(ray.aod_az, ray.aod_zen, ud);
    direction(ray.aoa_az, ray.aoa_zen, ua);
    const double field = std::sqrt(element_power(rx.element, fr, ua) * element_power(tx.element, ft, ud));
    acc += field * std::polar(1.0, ray.phase) * element_phase(rx, fr, q, ua) * element_phase(tx, ft, p, ud);
  }
  return std::sqrt(cl.power / static_cast<double>(cl.rays.size())) * acc;
}

inline CMatrix cluster_matrix(const relaysim::Cluster& cl, const relaysim::ArrayGeometry& tx,
                              const relaysim::ArrayGeometry& rx) {
  const int nr = static_cast<int>(rx.size()), nt = static_cast<int>(tx.size());
  CMatrix h(nr, nt);
  for (int q = 0; q < nr; ++q)
    for (int p = 0; p < nt; ++p) h(q, p) = channel_entry(cl, tx, rx, q, p);
  return h;
}

inline std::vector<CMatrix> cluster_matrices(const relaysim::ClusterSet& cs, const relaysim::ArrayGeometry& tx,
                                             const relaysim::ArrayGeometry& rx) {
  std::vector<CMatrix> out;
  for (const auto& c : cs.clusters) out.push_back(cluster_matrix(c, tx, rx));
  return out;
}

inline CMatrix sum(const std::vector<CMatrix>& hs) {
  CMatrix s = CMatrix::Zero(hs.front().rows(), hs.front().cols());
  for (const auto& h : hs) s += h;
  return s;
}

inline CMatrix dense_phi(const relaysim::RelayConfigMatrix& phi) {
  const int n = static_cast<int>(phi.size());
  CMatrix m = CMatrix::Zero(n, n);
  const double g = std::pow(10.0, phi.amp_gain_db / 20.0);
  for (int k = 0; k < n; ++k) m(k, k) = std::polar(g, phi.phases[static_cast<std::size_t>(k)]);
  return m;
}

/// L[n, m] = sum_{d, s, k, l} w_D[d] H_RD,n[d, k] Phi[k, l] H_SR,m[l, s] w_S[s].
inline CMatrix long_term(const CVector& w_s, const CVector& w_d, const CMatrix& phi, const std::vector<CMatrix>& h_sr,
                         const std::vector<CMatrix>& h_rd) {
  CMatrix l(static_cast<int>(h_rd.size()), static_cast<int>(h_sr.size()));
  for (std::size_t n = 0; n < h_rd.size(); ++n)
    for (std::size_t m = 0; m < h_sr.size(); ++m) {
      Complex acc = 0.0;
      for (int d = 0; d < w_d.size(); ++d)
        for (int s = 0; s < w_s.size(); ++s)
          for (int k = 0; k < phi.rows(); ++k)
            for (int j = 0; j < phi.cols(); ++j) acc += w_d[d] * h_rd[n](d, k) * phi(k, j) * h_sr[m](j, s) * w_s[s];
      l(static_cast<int>(n), static_cast<int>(m)) = acc;
    }
  return l;
}

/// w_D^T H Phi Phi^H H^H w_D^* sigma2 as plain matrix products.
inline double af_noise(const CVector& w_d, const CMatrix& h_rd, const CMatrix& phi, double sigma2) {
  const CMatrix row = w_d.transpose() * h_rd * phi;
  return (row * row.adjoint())(0, 0).real() * sigma2;
}

struct Triple {
  std::size_t s, d, p;
  double value;
};

/// Enumerates every (s, d, p) and keeps the first strict maximum in
/// lexicographic order.
inline Triple exhaustive_sweep(const std::vector<CVector>& cb_s, const std::vector<CVector>& cb_d,
                               const std::vector<CMatrix>& phis, const CMatrix& h_sr, const CMatrix& h_rd,
                               double signal_gain, double noise_w, double relay_noise_gain) {
  Triple best{0, 0, 0, -1.0};
  for (std::size_t s = 0; s < cb_s.size(); ++s)
    for (std::size_t d = 0; d < cb_d.size(); ++d)
      for (std::size_t p = 0; p < phis.size(); ++p) {
        const Complex y = (cb_d[d].transpose() * h_rd * phis[p] * h_sr * cb_s[s])(0, 0);
        const CMatrix row = cb_d[d].transpose() * h_rd * phis[p];
        const double relay = (row * row.adjoint())(0, 0).real();
        const double v = signal_gain * std::norm(y) / (noise_w + relay_noise_gain * relay);
        if (v > best.value) best = {s, d, p, v};
      }
  return best;
}

/// Point sampler for segment/box intersection: true iff any of `n` evenly
/// spaced points (endpoints included) lies in the closed box.
inline bool sampled_hit(const relaysim::Vec3& a, const relaysim::Vec3& b, const relaysim::Box& box, int n) {
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    bool in = true;
    for (int k = 0; k < 3; ++k) {
      const double x = a[k] + t * (b[k] - a[k]);
      in = in && x >= box.min[k] && x <= box.max[k];
    }
    if (in) return true;
  }
  return false;
}

/// EESM straight from the definition.
inline double eesm_db(const std::vector<double>& db, double beta) {
  double acc = 0.0;
  for (double x : db) acc += std::exp(-std::pow(10.0, x / 10.0) / beta);
  return 10.0 * std::log10(-beta * std::log(acc / static_cast<double>(db.size())));
}

}  // namespace oracle

namespace fixtures {

inline relaysim::ArrayGeometry random_array(relaysim::Rng& rng, int rows, int cols, bool directional = false) {
  relaysim::ArrayGeometry g;
  g.rows_v = rows;
  g.cols_h = cols;
  g.spacing = relaysim::uniform(rng, 0.3, 0.7);
  g.boresight_az = relaysim::uniform(rng, -M_PI, M_PI);
  g.boresight_zen = relaysim::uniform(rng, M_PI / 3, 2 * M_PI / 3);
  g.element = directional ? relaysim::ElementPattern::tr38901() : relaysim::ElementPattern::iso();
  return g;
}

inline relaysim::ClusterSet random_clusters(relaysim::Rng& rng, int n_clusters, int n_rays) {
  auto prof = relaysim::default_profile(relaysim::Environment::UmaNlos);
  prof.n_clusters = n_clusters;
  prof.n_rays = n_rays;
  relaysim::LinkAngles geo{relaysim::uniform(rng, -M_PI, M_PI), relaysim::uniform(rng, 1.0, 2.0),
                           relaysim::uniform(rng, -M_PI, M_PI), relaysim::uniform(rng, 1.0, 2.0)};
  return relaysim::draw_clusters(rng, relaysim::LinkKind::SR, relaysim::Environment::UmaNlos, prof, geo);
}

inline relaysim::CVector random_unit(relaysim::Rng& rng, int n) {
  relaysim::CVector v(n);
  for (int i = 0; i < n; ++i) v[i] = {relaysim::standard_normal(rng), relaysim::standard_normal(rng)};
  return v / v.norm();
}

inline std::vector<double> random_phases(relaysim::Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  for (auto& x : p) x = relaysim::uniform(rng, -M_PI, M_PI);
  return p;
}

inline double rel_err(const relaysim::CMatrix& a, const relaysim::CMatrix& b) {
  return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

}  // namespace fixtures
