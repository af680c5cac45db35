#pragma once

// Stochastic cluster/ray channel: parameter draws, per-cluster MIMO
// matrices and the frequency-flat path loss law.
//
// A realization keeps every ray as a rank-one term c * a_rx a_tx^T with the
// array responses stored as their horizontal/vertical Kronecker factors, so
// large reflecting surfaces never need a dense per-cluster matrix. Dense
// matrices are produced on demand.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "relaysim/antenna.hpp"
#include "relaysim/error.hpp"
#include "relaysim/geometry.hpp"
#include "relaysim/rng.hpp"
#include "relaysim/units.hpp"

namespace relaysim {

enum class LinkKind { SR, RD, SD, IR, ID };

inline const char* to_string(LinkKind k) {
  switch (k) {
    case LinkKind::SR: return "SR";
    case LinkKind::RD: return "RD";
    case LinkKind::SD: return "SD";
    case LinkKind::IR: return "IR";
    case LinkKind::ID: return "ID";
  }
  return "?";
}

enum class Environment { UmaLos, UmaNlos };

inline Environment parse_environment(std::string_view key) {
  if (key == "uma_los" || key == "UMA_LOS") return Environment::UmaLos;
  if (key == "uma_nlos" || key == "UMA_NLOS") return Environment::UmaNlos;
  throw ConfigError("unknown channel environment '" + std::string(key) + "'");
}

// ---------------------------------------------------------------------------
// Path loss

struct PathLossParams {
  double a = 22.0;  // distance slope, dB/decade
  double b = 28.0;  // intercept, dB
  double c = 20.0;  // frequency slope, dB/decade of GHz
  double shadow_sigma = 0.0;
};

inline PathLossParams default_path_loss(Environment env) {
  if (env == Environment::UmaLos) return {22.0, 28.0, 20.0, 0.0};
  return {39.08, 13.54, 20.0, 0.0};
}

/// PL = a log10(d) + b + c log10(fc_ghz) + X, in dB.
inline double path_loss_db(double d_m, double fc_ghz, const PathLossParams& p,
                           std::optional<double> shadow_db = std::nullopt) {
  if (!(d_m > 0.0)) throw DomainError("path_loss_db: distance must be > 0");
  if (!(fc_ghz >= 0.5 && fc_ghz <= 100.0)) throw DomainError("path_loss_db: carrier outside 0.5-100 GHz");
  return p.a * std::log10(d_m) + p.b + p.c * std::log10(fc_ghz) + shadow_db.value_or(0.0);
}

// ---------------------------------------------------------------------------
// Cluster parameters

struct RayParams {
  double aod_az = 0.0;
  double aod_zen = kPi / 2;
  double aoa_az = 0.0;
  double aoa_zen = kPi / 2;
  double phase = 0.0;
};

struct Cluster {
  double power = 0.0;    // fraction of link power
  double delay = 0.0;    // s
  double doppler = 0.0;  // Hz
  std::vector<RayParams> rays;
};

struct ClusterSet {
  std::vector<Cluster> clusters;
  LinkKind link_kind = LinkKind::SR;

  double total_power() const {
    double s = 0.0;
    for (const auto& c : clusters) s += c.power;
    return s;
  }
};

/// Cluster statistics of one propagation environment. Intra-cluster ray
/// spreads are `asd_deg`/`zsd_deg`; cluster mean angles scatter around the
/// geometric direction with the `cluster_*` spreads.
struct ChannelProfile {
  int n_clusters = 20;
  int n_rays = 20;
  double delay_spread_s = 100e-9;
  double decay_db = 3.0;
  double asd_deg = 10.0;
  double zsd_deg = 5.0;
  double cluster_aod_az_deg = 20.0;
  double cluster_aoa_az_deg = 60.0;
  double cluster_aod_zen_deg = 8.0;
  double cluster_aoa_zen_deg = 15.0;
  /// Ricean factor of the specular LOS ray; only used for LOS profiles.
  std::optional<double> k_factor_db;
  double coherence_s = 0.1;
  double shadow_sigma_db = 0.0;
  double ue_speed_mps = 0.0;

  void validate() const {
    if (n_clusters < 1) throw ConfigError("channel.n_clusters: must be >= 1");
    if (n_rays < 1) throw ConfigError("channel.n_rays: must be >= 1");
    if (delay_spread_s < 0.0) throw ConfigError("channel.delay_spread_s: must be >= 0");
    if (!(coherence_s > 0.0)) throw ConfigError("channel.coherence_s: must be > 0");
    if (shadow_sigma_db < 0.0) throw ConfigError("channel.shadow_sigma_db: must be >= 0");
    if (ue_speed_mps < 0.0) throw ConfigError("channel.ue_speed_mps: must be >= 0");
  }
};

inline ChannelProfile default_profile(Environment env) {
  ChannelProfile p;
  if (env == Environment::UmaLos) {
    p.delay_spread_s = 50e-9;
    p.cluster_aod_az_deg = 15.0;
    p.cluster_aoa_az_deg = 50.0;
    p.cluster_aod_zen_deg = 5.0;
    p.cluster_aoa_zen_deg = 10.0;
    p.k_factor_db = 9.0;
  }
  return p;
}

/// Geometric departure/arrival directions of a link, global frame.
struct LinkAngles {
  double aod_az = 0.0;
  double aod_zen = kPi / 2;
  double aoa_az = kPi;
  double aoa_zen = kPi / 2;

  static LinkAngles between(const Vec3& tx, const Vec3& rx) {
    const auto dep = to_angles(rx - tx);
    const auto arr = to_angles(tx - rx);
    return {dep.az, dep.zen, arr.az, arr.zen};
  }
};

inline ClusterSet draw_clusters(Rng& rng, LinkKind kind, Environment env, const ChannelProfile& prof,
                                const LinkAngles& geo = {}, double carrier_hz = 28e9) {
  prof.validate();
  const bool specular = env == Environment::UmaLos && prof.k_factor_db.has_value();
  const int n = prof.n_clusters;
  ClusterSet set;
  set.link_kind = kind;
  set.clusters.resize(static_cast<std::size_t>(n));

  std::vector<double> delays(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i) delays[static_cast<std::size_t>(i)] = exponential(rng, prof.delay_spread_s);
  std::sort(delays.begin() + 1, delays.end());

  // Exponential power profile in delay order, normalized to one.
  const int first_scattered = specular ? 1 : 0;
  std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
  double scattered_sum = 0.0;
  for (int i = first_scattered; i < n; ++i) {
    weight[static_cast<std::size_t>(i)] = std::pow(10.0, -prof.decay_db * (i - first_scattered) / 10.0);
    scattered_sum += weight[static_cast<std::size_t>(i)];
  }
  double los_fraction = 0.0;
  if (specular) los_fraction = n == 1 ? 1.0 : db_to_linear(*prof.k_factor_db) / (db_to_linear(*prof.k_factor_db) + 1.0);

  const double max_doppler = prof.ue_speed_mps * carrier_hz / kSpeedOfLight;
  const double ray_az = deg_to_rad(prof.asd_deg), ray_zen = deg_to_rad(prof.zsd_deg);

  for (int i = 0; i < n; ++i) {
    auto& c = set.clusters[static_cast<std::size_t>(i)];
    c.delay = delays[static_cast<std::size_t>(i)];
    if (specular && i == 0) {
      c.power = los_fraction;
      c.rays.push_back({geo.aod_az, geo.aod_zen, geo.aoa_az, geo.aoa_zen, uniform(rng, -kPi, kPi)});
      c.doppler = max_doppler * std::cos(geo.aoa_az);
      continue;
    }
    c.power = (1.0 - los_fraction) * weight[static_cast<std::size_t>(i)] / scattered_sum;
    const double mean_aod_az = wrap_angle(geo.aod_az + deg_to_rad(prof.cluster_aod_az_deg) * standard_normal(rng));
    const double mean_aoa_az = wrap_angle(geo.aoa_az + deg_to_rad(prof.cluster_aoa_az_deg) * standard_normal(rng));
    const double mean_aod_zen = fold_zenith(geo.aod_zen + deg_to_rad(prof.cluster_aod_zen_deg) * standard_normal(rng));
    const double mean_aoa_zen = fold_zenith(geo.aoa_zen + deg_to_rad(prof.cluster_aoa_zen_deg) * standard_normal(rng));
    c.doppler = max_doppler * std::cos(mean_aoa_az);
    c.rays.reserve(static_cast<std::size_t>(prof.n_rays));
    for (int m = 0; m < prof.n_rays; ++m) {
      RayParams r;
      r.aod_az = wrap_angle(mean_aod_az + ray_az * standard_normal(rng));
      r.aoa_az = wrap_angle(mean_aoa_az + ray_az * standard_normal(rng));
      r.aod_zen = fold_zenith(mean_aod_zen + ray_zen * standard_normal(rng));
      r.aoa_zen = fold_zenith(mean_aoa_zen + ray_zen * standard_normal(rng));
      r.phase = uniform(rng, -kPi, kPi);
      c.rays.push_back(r);
    }
  }
  // Clean up rounding so the powers sum to one.
  const double total = set.total_power();
  for (auto& c : set.clusters) c.power /= total;
  return set;
}

inline ClusterSet draw_clusters(Rng& rng, LinkKind kind, std::string_view env_key, const LinkAngles& geo = {},
                                double carrier_hz = 28e9) {
  const Environment env = parse_environment(env_key);
  return draw_clusters(rng, kind, env, default_profile(env), geo, carrier_hz);
}

// ---------------------------------------------------------------------------
// Realizations

/// Array responses of a set of rays, one column per ray, kept as Kronecker
/// factors: response[r * cols + c] = vertical(r, ray) * horizontal(c, ray).
struct RayResponses {
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  CMatrix horizontal;  // cols x R
  CMatrix vertical;    // rows x R

  Eigen::Index size() const { return rows * cols; }

  CMatrix materialize(Eigen::Index first, Eigen::Index count) const {
    CMatrix out(size(), count);
    for (Eigen::Index k = 0; k < count; ++k)
      out.col(k) = kron_response(vertical.col(first + k), horizontal.col(first + k));
    return out;
  }

  /// (A^T y) restricted to rays [first, first + count).
  CVector transpose_apply(const CVector& y, Eigen::Index first, Eigen::Index count) const {
    Eigen::Map<const CMatrix> ym(y.data(), cols, rows);
    const CMatrix t = horizontal.middleCols(first, count).transpose() * ym;  // count x rows
    return (t.array() * vertical.middleCols(first, count).transpose().array()).rowwise().sum();
  }

  /// A t over rays [first, first + count).
  CVector combine(const CVector& t, Eigen::Index first, Eigen::Index count) const {
    CVector out(size());
    Eigen::Map<CMatrix> om(out.data(), cols, rows);
    om.noalias() = horizontal.middleCols(first, count) * t.asDiagonal() * vertical.middleCols(first, count).transpose();
    return out;
  }

  /// A^H A via (V^H V) o (H^H H).
  CMatrix gram() const {
    const CMatrix kv = vertical.adjoint() * vertical;
    const CMatrix kh = horizontal.adjoint() * horizontal;
    return kv.cwiseProduct(kh);
  }
};

class ChannelRealization {
 public:
  ChannelRealization() = default;

  Eigen::Index n_rx() const { return rx_.size(); }
  Eigen::Index n_tx() const { return tx_.size(); }
  std::size_t n_clusters() const { return delays_.size(); }
  Eigen::Index n_rays() const { return coef_.size(); }
  const std::vector<double>& delays() const { return delays_; }
  const std::vector<double>& dopplers() const { return dopplers_; }
  double generated_at() const { return generated_at_; }
  double coherence_until() const { return coherence_until_; }

  /// H_n, N_rx x N_tx.
  CMatrix cluster_matrix(std::size_t n) const {
    const auto [b, k] = ray_range(n);
    return rx_.materialize(b, k) * coef_.segment(b, k).asDiagonal() * tx_.materialize(b, k).transpose();
  }

  /// Sum of all per-cluster matrices (delay and Doppler phasors omitted).
  CMatrix long_term_matrix() const {
    return rx_.materialize(0, n_rays()) * coef_.asDiagonal() * tx_.materialize(0, n_rays()).transpose();
  }

  /// H_n x.
  CVector apply(std::size_t n, const CVector& x) const {
    const auto [b, k] = ray_range(n);
    expects(x.size() == n_tx(), "ChannelRealization::apply: dimension mismatch");
    const CVector t = coef_.segment(b, k).cwiseProduct(tx_.transpose_apply(x, b, k));
    return rx_.combine(t, b, k);
  }

  /// H_n^T y.
  CVector apply_transpose(std::size_t n, const CVector& y) const {
    const auto [b, k] = ray_range(n);
    expects(y.size() == n_rx(), "ChannelRealization::apply_transpose: dimension mismatch");
    const CVector t = coef_.segment(b, k).cwiseProduct(rx_.transpose_apply(y, b, k));
    return tx_.combine(t, b, k);
  }

  /// sum_n H_n x.
  CVector long_term_apply(const CVector& x) const {
    expects(x.size() == n_tx(), "ChannelRealization::long_term_apply: dimension mismatch");
    const CVector t = coef_.cwiseProduct(tx_.transpose_apply(x, 0, n_rays()));
    return rx_.combine(t, 0, n_rays());
  }

  /// (sum_n H_n)^T y.
  CVector long_term_apply_transpose(const CVector& y) const {
    expects(y.size() == n_rx(), "ChannelRealization::long_term_apply_transpose: dimension mismatch");
    const CVector t = coef_.cwiseProduct(rx_.transpose_apply(y, 0, n_rays()));
    return tx_.combine(t, 0, n_rays());
  }

  /// Hbar^H Hbar (N_tx x N_tx) without forming Hbar.
  CMatrix long_term_gram() const {
    const CMatrix b = tx_.materialize(0, n_rays()) * coef_.asDiagonal();
    return b.conjugate() * rx_.gram() * b.transpose();
  }

 private:
  friend ChannelRealization assemble_channel(const ClusterSet&, const ArrayGeometry&, const ArrayGeometry&, double,
                                             double, double);

  std::pair<Eigen::Index, Eigen::Index> ray_range(std::size_t n) const {
    expects(n < n_clusters(), "ChannelRealization: cluster index out of range");
    return {static_cast<Eigen::Index>(first_ray_[n]), static_cast<Eigen::Index>(first_ray_[n + 1] - first_ray_[n])};
  }

  RayResponses rx_;
  RayResponses tx_;
  CVector coef_;
  std::vector<std::size_t> first_ray_;
  std::vector<double> delays_;
  std::vector<double> dopplers_;
  double generated_at_ = 0.0;
  double coherence_until_ = 0.0;
};

/// Builds per-cluster matrices
///   H_n[q, p] = sqrt(P_n / M_n) sum_m F_rx(aoa) e^{j phi} F_tx(aod) e^{j k_rx.d_q} e^{j k_tx.d_p}
/// with single-polarization elements. Delay and Doppler terms stay separate.
inline ChannelRealization assemble_channel(const ClusterSet& clusters, const ArrayGeometry& tx,
                                           const ArrayGeometry& rx, double carrier_hz, double generated_at = 0.0,
                                           double coherence_s = 0.1) {
  tx.validate();
  rx.validate();
  expects(!clusters.clusters.empty(), "assemble_channel: empty cluster set");
  expects(carrier_hz > 0.0, "assemble_channel: carrier must be > 0");

  ChannelRealization h;
  Eigen::Index n_rays = 0;
  for (const auto& c : clusters.clusters) n_rays += static_cast<Eigen::Index>(c.rays.size());

  h.rx_ = {rx.rows_v, rx.cols_h, CMatrix(rx.cols_h, n_rays), CMatrix(rx.rows_v, n_rays)};
  h.tx_ = {tx.rows_v, tx.cols_h, CMatrix(tx.cols_h, n_rays), CMatrix(tx.rows_v, n_rays)};
  h.coef_.resize(n_rays);
  h.first_ray_.push_back(0);

  Eigen::Index k = 0;
  for (const auto& c : clusters.clusters) {
    expects(!c.rays.empty(), "assemble_channel: cluster without rays");
    const double amp = std::sqrt(c.power / static_cast<double>(c.rays.size()));
    for (const auto& r : c.rays) {
      const Vec3 dep = tx.to_local(unit_direction(r.aod_az, r.aod_zen));
      const Vec3 arr = rx.to_local(unit_direction(r.aoa_az, r.aoa_zen));
      const auto la_tx = to_angles(dep), la_rx = to_angles(arr);
      const double field = element_field(rx.element, la_rx.az, la_rx.zen) * element_field(tx.element, la_tx.az, la_tx.zen);
      h.coef_[k] = std::polar(amp * field, r.phase);
      auto ft = response_factors(tx, dep);
      auto fr = response_factors(rx, arr);
      h.tx_.horizontal.col(k) = ft.horizontal;
      h.tx_.vertical.col(k) = ft.vertical;
      h.rx_.horizontal.col(k) = fr.horizontal;
      h.rx_.vertical.col(k) = fr.vertical;
      ++k;
    }
    h.first_ray_.push_back(static_cast<std::size_t>(k));
    h.delays_.push_back(c.delay);
    h.dopplers_.push_back(c.doppler);
  }
  h.generated_at_ = generated_at;
  h.coherence_until_ = generated_at + coherence_s;
  return h;
}

inline bool is_expired(const ChannelRealization& r, double now) { return now >= r.coherence_until(); }

}  // namespace relaysim
