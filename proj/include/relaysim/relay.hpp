#pragma once

// Relay configuration matrices (IRS and amplify-and-forward), the
// reflect-and-steer configuration codebook and the relayed AF noise power.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "relaysim/antenna.hpp"
#include "relaysim/channel.hpp"
#include "relaysim/error.hpp"
#include "relaysim/units.hpp"

namespace relaysim {

enum class RelayKind { IRS, AF };

inline const char* to_string(RelayKind k) { return k == RelayKind::IRS ? "irs" : "af"; }

inline RelayKind parse_relay_kind(const std::string& s) {
  if (s == "irs" || s == "IRS") return RelayKind::IRS;
  if (s == "af" || s == "AF") return RelayKind::AF;
  throw ConfigError("relay.kind: expected \"irs\" or \"af\", got \"" + s + "\"");
}

/// Diagonal relay matrix: entries g * e^{j theta_n}.
struct RelayConfigMatrix {
  RelayKind kind = RelayKind::IRS;
  std::vector<double> phases;
  double amp_gain_db = 0.0;

  std::size_t size() const { return phases.size(); }
  double gain() const { return std::pow(10.0, amp_gain_db / 20.0); }

  CVector diagonal() const {
    CVector d(static_cast<Eigen::Index>(phases.size()));
    const double g = gain();
    for (std::size_t n = 0; n < phases.size(); ++n) d[static_cast<Eigen::Index>(n)] = std::polar(g, phases[n]);
    return d;
  }

  CMatrix matrix() const { return diagonal().asDiagonal(); }

  CVector apply(const CVector& x) const {
    expects(x.size() == static_cast<Eigen::Index>(size()), "RelayConfigMatrix::apply: dimension mismatch");
    return diagonal().cwiseProduct(x);
  }
};

inline RelayConfigMatrix irs_matrix(std::vector<double> phases) {
  return {RelayKind::IRS, std::move(phases), 0.0};
}

inline RelayConfigMatrix af_matrix(std::vector<double> phases, double amp_gain_db) {
  if (!(amp_gain_db >= 0.0)) throw DomainError("af_matrix: amplification gain must be >= 0 dB");
  return {RelayKind::AF, std::move(phases), amp_gain_db};
}

struct RelayNoise {
  double sigma2 = 0.0;  // W per receive chain
  double noise_figure_db = 5.0;

  static RelayNoise thermal(double bandwidth_hz, double noise_figure_db = 5.0) {
    return {thermal_noise_watt(bandwidth_hz, noise_figure_db), noise_figure_db};
  }
};

/// w_D^T H_RD Phi Phi^H H_RD^H w_D^* sigma2, with H_RD the long-term channel.
inline double af_relayed_noise_power(const Codeword& w_d, const ChannelRealization& h_rd, const RelayConfigMatrix& phi,
                                     const RelayNoise& noise) {
  expects(phi.kind == RelayKind::AF, "af_relayed_noise_power: relay must be AF");
  expects(w_d.weights.size() == h_rd.n_rx(), "af_relayed_noise_power: codeword/channel dimension mismatch");
  expects(static_cast<Eigen::Index>(phi.size()) == h_rd.n_tx(), "af_relayed_noise_power: relay/channel dimension mismatch");
  const CVector v = phi.apply(h_rd.long_term_apply_transpose(w_d.weights));
  return v.squaredNorm() * noise.sigma2;
}

/// Grid of DFT spatial-frequency bins: horizontal bin ih in [0, n_h),
/// vertical bin iv in [0, n_v), flat index iv * n_h + ih.
struct DirectionGrid {
  int n_h = 1;
  int n_v = 1;
  std::size_t size() const { return static_cast<std::size_t>(n_h) * n_v; }
  bool operator==(const DirectionGrid& o) const { return n_h == o.n_h && n_v == o.n_v; }
};

/// Reflect-and-steer codebook, generated on demand. Entry i * n_out + o
/// pairs incidence bin i with departure bin o; element (r, c) gets
///   theta = -2 pi (c (ih + oh) / n_h) - 2 pi (r (iv + ov) / n_v)
/// reduced modulo 2 pi through the integer bins, so entries whose bin sums
/// coincide are bit-identical.
class RelayCodebook {
 public:
  RelayCodebook(RelayKind kind, const ArrayGeometry& geom, DirectionGrid in, DirectionGrid out, double amp_gain_db = 0.0)
      : kind_(kind), rows_(geom.rows_v), cols_(geom.cols_h), in_(in), out_(out), amp_gain_db_(amp_gain_db) {
    geom.validate();
    if (in.n_h < 1 || in.n_v < 1 || out.n_h < 1 || out.n_v < 1)
      throw ConfigError("relay.codebook: direction counts must be >= 1");
    if (kind == RelayKind::IRS) amp_gain_db_ = 0.0;
    if (!(amp_gain_db_ >= 0.0)) throw DomainError("relay codebook: amplification gain must be >= 0 dB");
  }

  RelayKind kind() const { return kind_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t elements() const { return static_cast<std::size_t>(rows_) * cols_; }
  const DirectionGrid& incidence() const { return in_; }
  const DirectionGrid& departure() const { return out_; }
  double amp_gain_db() const { return amp_gain_db_; }
  double gain() const { return std::pow(10.0, amp_gain_db_ / 20.0); }
  std::size_t size() const { return in_.size() * out_.size(); }

  /// Incidence and departure grids coincide, so an entry depends only on
  /// the bin sums and the codebook is a set of 2D DFT rows.
  bool dft_structured() const { return in_ == out_; }

  std::pair<int, int> bin_sum(std::size_t idx) const {
    expects(idx < size(), "RelayCodebook: index out of range");
    const std::size_t i = idx / out_.size(), o = idx % out_.size();
    const int ih = static_cast<int>(i % in_.n_h), iv = static_cast<int>(i / in_.n_h);
    const int oh = static_cast<int>(o % out_.n_h), ov = static_cast<int>(o / out_.n_h);
    return {ih + oh, iv + ov};
  }

  RelayConfigMatrix operator[](std::size_t idx) const {
    expects(idx < size(), "RelayCodebook: index out of range");
    if (dft_structured()) {
      const auto [kh, kv] = bin_sum(idx);
      return dft_entry(kh % in_.n_h, kv % in_.n_v);
    }
    const std::size_t i = idx / out_.size(), o = idx % out_.size();
    const int ih = static_cast<int>(i % in_.n_h), iv = static_cast<int>(i / in_.n_h);
    const int oh = static_cast<int>(o % out_.n_h), ov = static_cast<int>(o / out_.n_h);
    std::vector<double> phases(elements());
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) {
        const double t = phase_of(c, ih, in_.n_h) + phase_of(c, oh, out_.n_h) + phase_of(r, iv, in_.n_v) +
                         phase_of(r, ov, out_.n_v);
        phases[static_cast<std::size_t>(r) * cols_ + c] = t;
      }
    return {kind_, std::move(phases), amp_gain_db_};
  }

  /// Entry of a DFT-structured codebook addressed by its bin sums.
  RelayConfigMatrix dft_entry(int kh, int kv) const {
    std::vector<double> phases(elements());
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c)
        phases[static_cast<std::size_t>(r) * cols_ + c] = phase_of(c, kh, in_.n_h) + phase_of(r, kv, in_.n_v);
    return {kind_, std::move(phases), amp_gain_db_};
  }

  std::vector<RelayConfigMatrix> materialize() const {
    std::vector<RelayConfigMatrix> out;
    out.reserve(size());
    for (std::size_t k = 0; k < size(); ++k) out.push_back((*this)[k]);
    return out;
  }

 private:
  static double phase_of(int pos, int bin, int n) {
    const auto m = (static_cast<std::int64_t>(pos) * bin) % n;
    return -kTwoPi * static_cast<double>(m) / n;
  }

  RelayKind kind_;
  int rows_;
  int cols_;
  DirectionGrid in_;
  DirectionGrid out_;
  double amp_gain_db_;
};

/// Default grids: twice the panel size in each dimension.
inline RelayCodebook default_relay_codebook(RelayKind kind, const ArrayGeometry& geom, double amp_gain_db = 0.0,
                                            int oversampling = 2) {
  if (oversampling < 1) throw ConfigError("relay.codebook.oversampling: must be >= 1");
  const DirectionGrid g{oversampling * geom.cols_h, oversampling * geom.rows_v};
  return RelayCodebook(kind, geom, g, g, amp_gain_db);
}

/// Materialized codebook with n_in horizontal incidence bins and n_out
/// horizontal departure bins (a single vertical bin each).
inline std::vector<RelayConfigMatrix> relay_codebook(RelayKind kind, const ArrayGeometry& geom, int n_in, int n_out,
                                                     double amp_gain_db = 0.0) {
  if (n_in < 1 || n_out < 1) throw ConfigError("relay codebook: counts must be >= 1");
  return RelayCodebook(kind, geom, {n_in, 1}, {n_out, 1}, amp_gain_db).materialize();
}

}  // namespace relaysim
