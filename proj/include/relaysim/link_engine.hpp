#pragma once

// Link-level pipeline: configuration sweep, long-term fading L[n, m],
// frequency-selective PSDs, cascaded path loss, interference and the
// per-subband / effective SINR.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "relaysim/antenna.hpp"
#include "relaysim/channel.hpp"
#include "relaysim/dft.hpp"
#include "relaysim/error.hpp"
#include "relaysim/relay.hpp"
#include "relaysim/units.hpp"

namespace relaysim {

struct SubbandGrid {
  int n_subbands = 50;
  double subband_hz = 2e6;
  std::vector<double> center_freqs;

  static SubbandGrid uniform(double bandwidth_hz, int n_subbands = 50) {
    expects(bandwidth_hz > 0.0 && n_subbands >= 1, "SubbandGrid: invalid bandwidth or count");
    SubbandGrid g;
    g.n_subbands = n_subbands;
    g.subband_hz = bandwidth_hz / n_subbands;
    for (int i = 0; i < n_subbands; ++i) g.center_freqs.push_back(-bandwidth_hz / 2 + (i + 0.5) * g.subband_hz);
    return g;
  }

  double bandwidth() const { return n_subbands * subband_hz; }
  bool same_as(const SubbandGrid& o) const { return n_subbands == o.n_subbands && subband_hz == o.subband_hz; }
};

struct Psd {
  std::vector<double> values;  // W/Hz
  SubbandGrid grid;

  static Psd flat(const SubbandGrid& g, double w_per_hz) {
    return {std::vector<double>(static_cast<std::size_t>(g.n_subbands), w_per_hz), g};
  }

  double total_power() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.subband_hz;
  }
};

/// Transmit PSD spreading `power_dbm` evenly over the grid.
inline Psd flat_tx_psd(const SubbandGrid& g, double power_dbm) { return Psd::flat(g, dbm_to_watt(power_dbm) / g.bandwidth()); }

/// Receiver thermal noise PSD for a noise figure.
inline Psd noise_psd(const SubbandGrid& g, double noise_figure_db = 9.0) {
  return Psd::flat(g, dbm_to_watt(kThermalNoiseDbmPerHz + noise_figure_db));
}

struct SweepResult {
  std::size_t w_s_idx = 0;
  std::size_t w_d_idx = 0;
  std::size_t phi_idx = 0;
  double predicted_snr_db = -std::numeric_limits<double>::infinity();
};

struct SinrReport {
  std::vector<double> per_subband_db;
  double effective_db = -std::numeric_limits<double>::infinity();
  double timestamp = 0.0;
};

/// Scalars of the sweep objective
///   signal_gain |w_D^T Hbar_RD Phi Hbar_SR w_S|^2 / (noise_w + relay_noise_gain sum_k |(Hbar_RD^T w_D)_k phi_k|^2).
/// signal_gain folds transmit power and cascaded path loss; relay_noise_gain
/// is the relay noise power scaled by the R->D loss (zero for an IRS).
struct LinkBudget {
  double signal_gain = 1.0;
  double noise_w = 1.0;
  double relay_noise_gain = 0.0;
};

inline LinkBudget relayed_budget(double tx_power_w, double cascade_loss_db, double noise_w, RelayKind kind,
                                 const RelayNoise& relay_noise, double rd_loss_db) {
  LinkBudget b{tx_power_w / db_to_linear(cascade_loss_db), noise_w, 0.0};
  if (kind == RelayKind::AF) b.relay_noise_gain = relay_noise.sigma2 / db_to_linear(rd_loss_db);
  return b;
}

// ---------------------------------------------------------------------------
// Sweep

namespace detail {

inline bool lex_less(std::size_t s, std::size_t d, std::size_t p, const SweepResult& r) {
  return std::tie(s, d, p) < std::tie(r.w_s_idx, r.w_d_idx, r.phi_idx);
}

/// Keeps the best objective value seen; exact ties go to the
/// lexicographically smallest (s, d, p).
struct Best {
  double value = -1.0;
  SweepResult result;

  void offer(double v, std::size_t s, std::size_t d, std::size_t p) {
    if (v > value || (v == value && lex_less(s, d, p, result))) {
      value = v;
      result = {s, d, p, 0.0};
    }
  }

  SweepResult finish() const {
    SweepResult r = result;
    r.predicted_snr_db = value > 0.0 ? linear_to_db(value) : -std::numeric_limits<double>::infinity();
    return r;
  }
};

}  // namespace detail

/// Source-side beams u_s = Hbar_SR w_s of one S->R realization, computed on
/// first use. ||u_s||^2 comes from the Gram matrix, so bounding a codeword
/// never needs its full relay-side vector. Safe to share across UEs.
class SourceBeams {
 public:
  SourceBeams(const Codebook& cb, const ChannelRealization& h_sr) : cb_(&cb), h_(&h_sr) {
    expects(cb.size() > 0, "sweep: empty source codebook");
    expects(static_cast<Eigen::Index>(cb[0].size()) == h_sr.n_tx(), "sweep: source codebook/channel mismatch");
    const CMatrix gram = h_sr.long_term_gram();
    const CMatrix w = cb.matrix();
    norm2_.resize(cb.size());
    for (std::size_t s = 0; s < cb.size(); ++s) {
      const auto col = w.col(static_cast<Eigen::Index>(s));
      norm2_[s] = std::max(0.0, (col.adjoint() * gram * col)(0, 0).real());
    }
    beams_.resize(cb.size());
  }

  std::size_t size() const { return norm2_.size(); }
  double norm2(std::size_t s) const { return norm2_[s]; }
  const ChannelRealization& channel() const { return *h_; }
  const Codebook& codebook() const { return *cb_; }

  const CVector& beam(std::size_t s) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!beams_[s]) beams_[s] = h_->long_term_apply((*cb_)[s].weights);
    return *beams_[s];
  }

 private:
  const Codebook* cb_;
  const ChannelRealization* h_;
  std::vector<double> norm2_;
  std::vector<std::optional<CVector>> beams_;
  std::mutex mutex_;
};

/// Exhaustive search over (w_S, w_D, Phi) for a relay codebook. Exact: pairs
/// (s, d) are visited in decreasing order of a Cauchy-Schwarz upper bound
/// and skipped only when the bound cannot reach the incumbent; for a
/// DFT-structured codebook all Phi of a pair are scored with one 2D FFT.
inline SweepResult sweep(SourceBeams& src, const Codebook& cb_d, const RelayCodebook& cb_phi,
                         const ChannelRealization& h_rd, const LinkBudget& budget) {
  expects(cb_d.size() > 0 && cb_phi.size() > 0, "sweep: empty codebook");
  const auto n_r = static_cast<Eigen::Index>(cb_phi.elements());
  expects(src.channel().n_rx() == n_r && h_rd.n_tx() == n_r, "sweep: relay dimension mismatch");
  expects(static_cast<Eigen::Index>(cb_d[0].size()) == h_rd.n_rx(), "sweep: destination codebook/channel mismatch");

  const double g2 = cb_phi.gain() * cb_phi.gain();
  std::vector<CVector> v(cb_d.size());
  std::vector<double> v_norm2(cb_d.size()), denom(cb_d.size());
  for (std::size_t d = 0; d < cb_d.size(); ++d) {
    v[d] = h_rd.long_term_apply_transpose(cb_d[d].weights);
    v_norm2[d] = v[d].squaredNorm();
    denom[d] = budget.noise_w + budget.relay_noise_gain * g2 * v_norm2[d];
  }

  struct Pair {
    double bound;
    std::size_t s, d;
  };
  std::vector<Pair> pairs;
  pairs.reserve(src.size() * cb_d.size());
  for (std::size_t s = 0; s < src.size(); ++s)
    for (std::size_t d = 0; d < cb_d.size(); ++d)
      pairs.push_back({budget.signal_gain * g2 * src.norm2(s) * v_norm2[d] / denom[d], s, d});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.bound > b.bound; });

  detail::Best best;
  const bool dft = cb_phi.dft_structured();
  const int n_h = cb_phi.incidence().n_h, n_v = cb_phi.incidence().n_v;
  std::optional<Dft2d> fft;
  std::vector<std::complex<double>> grid_in, grid_out;
  std::vector<CVector> entries;
  if (dft) {
    fft.emplace(n_v, n_h);
    grid_in.resize(fft->size());
    grid_out.resize(fft->size());
  } else {
    for (std::size_t p = 0; p < cb_phi.size(); ++p) entries.push_back(cb_phi[p].diagonal());
  }

  const int rows = cb_phi.rows(), cols = cb_phi.cols();
  for (const auto& pr : pairs) {
    if (pr.bound * (1.0 + 1e-9) < best.value) break;
    const CVector& u = src.beam(pr.s);
    const CVector x = v[pr.d].cwiseProduct(u);
    const double scale = budget.signal_gain / denom[pr.d];
    if (dft) {
      std::fill(grid_in.begin(), grid_in.end(), std::complex<double>{});
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          grid_in[static_cast<std::size_t>(r % n_v) * n_h + (c % n_h)] += x[static_cast<Eigen::Index>(r) * cols + c];
      fft->forward(grid_in.data(), grid_out.data());
      std::size_t arg = 0;
      double top = -1.0;
      for (std::size_t k = 0; k < grid_out.size(); ++k) {
        const double m = std::norm(grid_out[k]);
        if (m > top) {
          top = m;
          arg = k;
        }
      }
      // Lowest codebook index of class (kv, kh) is incidence bin 0, departure bin kv * n_h + kh.
      best.offer(scale * g2 * top, pr.s, pr.d, arg);
    } else {
      for (std::size_t p = 0; p < entries.size(); ++p)
        best.offer(scale * std::norm((x.array() * entries[p].array()).sum()), pr.s, pr.d, p);
    }
  }
  return best.finish();
}

inline SweepResult sweep(const Codebook& cb_s, const Codebook& cb_d, const RelayCodebook& cb_phi,
                         const ChannelRealization& h_sr, const ChannelRealization& h_rd, const LinkBudget& budget) {
  SourceBeams src(cb_s, h_sr);
  return sweep(src, cb_d, cb_phi, h_rd, budget);
}

/// Plain triple loop over an explicit list of relay configurations.
inline SweepResult sweep(const Codebook& cb_s, const Codebook& cb_d, std::span<const RelayConfigMatrix> cb_phi,
                         const ChannelRealization& h_sr, const ChannelRealization& h_rd, const LinkBudget& budget) {
  expects(cb_s.size() > 0 && cb_d.size() > 0 && !cb_phi.empty(), "sweep: empty codebook");
  expects(static_cast<Eigen::Index>(cb_phi[0].size()) == h_sr.n_rx() && h_rd.n_tx() == h_sr.n_rx(),
          "sweep: relay dimension mismatch");
  std::vector<CVector> u, v;
  for (std::size_t s = 0; s < cb_s.size(); ++s) u.push_back(h_sr.long_term_apply(cb_s[s].weights));
  for (std::size_t d = 0; d < cb_d.size(); ++d) v.push_back(h_rd.long_term_apply_transpose(cb_d[d].weights));
  std::vector<CVector> phis;
  for (const auto& p : cb_phi) phis.push_back(p.diagonal());
  detail::Best best;
  for (std::size_t s = 0; s < u.size(); ++s)
    for (std::size_t d = 0; d < v.size(); ++d)
      for (std::size_t p = 0; p < phis.size(); ++p) {
        const CVector vp = v[d].cwiseProduct(phis[p]);
        const double sig = budget.signal_gain * std::norm(vp.cwiseProduct(u[s]).sum());
        best.offer(sig / (budget.noise_w + budget.relay_noise_gain * vp.squaredNorm()), s, d, p);
      }
  return best.finish();
}

/// Relay-free sweep over (w_S, w_D); phi_idx is always 0.
inline SweepResult sweep_direct(const Codebook& cb_s, const Codebook& cb_d, const ChannelRealization& h_sd,
                                const LinkBudget& budget) {
  expects(cb_s.size() > 0 && cb_d.size() > 0, "sweep: empty codebook");
  const CMatrix m = cb_d.matrix().transpose() * h_sd.long_term_matrix() * cb_s.matrix();  // d x s
  detail::Best best;
  for (std::size_t s = 0; s < cb_s.size(); ++s)
    for (std::size_t d = 0; d < cb_d.size(); ++d)
      best.offer(budget.signal_gain * std::norm(m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(s))) /
                     budget.noise_w,
                 s, d, 0);
  return best.finish();
}

// ---------------------------------------------------------------------------
// Long-term fading and PSDs

/// L[n, m] = w_D^T H_RD,n Phi H_SR,m w_S.
inline CMatrix long_term(const Codeword& w_s, const Codeword& w_d, const RelayConfigMatrix& phi,
                         const ChannelRealization& h_sr, const ChannelRealization& h_rd) {
  expects(w_s.weights.size() == h_sr.n_tx() && w_d.weights.size() == h_rd.n_rx(), "long_term: codeword dimension mismatch");
  expects(static_cast<Eigen::Index>(phi.size()) == h_sr.n_rx() && h_rd.n_tx() == h_sr.n_rx(),
          "long_term: relay dimension mismatch");
  const auto n_r = h_sr.n_rx();
  CMatrix u(n_r, static_cast<Eigen::Index>(h_sr.n_clusters()));
  CMatrix v(n_r, static_cast<Eigen::Index>(h_rd.n_clusters()));
  for (std::size_t m = 0; m < h_sr.n_clusters(); ++m) u.col(static_cast<Eigen::Index>(m)) = h_sr.apply(m, w_s.weights);
  for (std::size_t n = 0; n < h_rd.n_clusters(); ++n)
    v.col(static_cast<Eigen::Index>(n)) = h_rd.apply_transpose(n, w_d.weights);
  return v.transpose() * phi.diagonal().asDiagonal() * u;
}

/// l[n] = w_D^T H_SD,n w_S.
inline CVector long_term_direct(const Codeword& w_s, const Codeword& w_d, const ChannelRealization& h_sd) {
  expects(w_s.weights.size() == h_sd.n_tx() && w_d.weights.size() == h_sd.n_rx(),
          "long_term_direct: codeword dimension mismatch");
  CVector l(static_cast<Eigen::Index>(h_sd.n_clusters()));
  for (std::size_t n = 0; n < h_sd.n_clusters(); ++n)
    l[static_cast<Eigen::Index>(n)] = w_d.weights.transpose() * h_sd.apply(n, w_s.weights);
  return l;
}

namespace detail {

inline CVector phasors(const std::vector<double>& doppler, const std::vector<double>& delay, double t, double f) {
  CVector e(static_cast<Eigen::Index>(delay.size()));
  for (std::size_t i = 0; i < delay.size(); ++i)
    e[static_cast<Eigen::Index>(i)] = std::polar(1.0, kTwoPi * (doppler[i] * t + delay[i] * f));
  return e;
}

}  // namespace detail

/// P(t, f) = tx_psd(f) |sum_{n,m} L[n,m] e^{j2pi v_n t} e^{j2pi tau_n f} e^{j2pi v_m t} e^{j2pi tau_m f}|^2.
inline Psd small_scale_psd(const CMatrix& l, const std::vector<double>& dopplers_rd, const std::vector<double>& dopplers_sr,
                           const std::vector<double>& delays_rd, const std::vector<double>& delays_sr, double t,
                           const SubbandGrid& grid, const Psd& tx_psd) {
  expects(static_cast<std::size_t>(l.rows()) == delays_rd.size() && delays_rd.size() == dopplers_rd.size() &&
              static_cast<std::size_t>(l.cols()) == delays_sr.size() && delays_sr.size() == dopplers_sr.size(),
          "small_scale_psd: list lengths do not match L");
  expects(tx_psd.grid.same_as(grid), "small_scale_psd: grid mismatch");
  Psd out{std::vector<double>(static_cast<std::size_t>(grid.n_subbands)), grid};
  for (int k = 0; k < grid.n_subbands; ++k) {
    const double f = grid.center_freqs[static_cast<std::size_t>(k)];
    const CVector a = detail::phasors(dopplers_rd, delays_rd, t, f);
    const CVector b = detail::phasors(dopplers_sr, delays_sr, t, f);
    const Complex h = (a.transpose() * l * b)(0, 0);
    out.values[static_cast<std::size_t>(k)] = tx_psd.values[static_cast<std::size_t>(k)] * std::norm(h);
  }
  return out;
}

/// Single-sum analogue for a direct link.
inline Psd small_scale_psd_direct(const CVector& l, const std::vector<double>& dopplers, const std::vector<double>& delays,
                                  double t, const SubbandGrid& grid, const Psd& tx_psd) {
  expects(static_cast<std::size_t>(l.size()) == delays.size() && delays.size() == dopplers.size(),
          "small_scale_psd_direct: list lengths do not match L");
  expects(tx_psd.grid.same_as(grid), "small_scale_psd_direct: grid mismatch");
  Psd out{std::vector<double>(static_cast<std::size_t>(grid.n_subbands)), grid};
  for (int k = 0; k < grid.n_subbands; ++k) {
    const CVector a = detail::phasors(dopplers, delays, t, grid.center_freqs[static_cast<std::size_t>(k)]);
    out.values[static_cast<std::size_t>(k)] = tx_psd.values[static_cast<std::size_t>(k)] * std::norm(a.cwiseProduct(l).sum());
  }
  return out;
}

inline Psd attenuate(Psd p, double loss_db) {
  const double g = 1.0 / db_to_linear(loss_db);
  for (auto& v : p.values) v *= g;
  return p;
}

/// PL(d_SR) + PL(d_RD) in dB.
inline double cascade_gain_db(double d_sr, double d_rd, double fc_ghz, const PathLossParams& env_sr,
                              const PathLossParams& env_rd) {
  return path_loss_db(d_sr, fc_ghz, env_sr) + path_loss_db(d_rd, fc_ghz, env_rd);
}

/// Relayed receive PSD: small-scale PSD of L attenuated by the cascaded loss.
inline Psd relayed_psd(const Codeword& w_s, const Codeword& w_d, const RelayConfigMatrix& phi,
                       const ChannelRealization& h_sr, const ChannelRealization& h_rd, double t, const SubbandGrid& grid,
                       const Psd& tx_psd, double cascade_loss_db) {
  const CMatrix l = long_term(w_s, w_d, phi, h_sr, h_rd);
  return attenuate(small_scale_psd(l, h_rd.dopplers(), h_sr.dopplers(), h_rd.delays(), h_sr.delays(), t, grid, tx_psd),
                   cascade_loss_db);
}

/// Relay-free receive PSD with path loss and blockage attenuation.
inline Psd direct_psd(const Codeword& w_s, const Codeword& w_d, const ChannelRealization& h_sd, double t,
                      const SubbandGrid& grid, const Psd& tx_psd, double path_loss_db, double blockage_db) {
  const CVector l = long_term_direct(w_s, w_d, h_sd);
  return attenuate(small_scale_psd_direct(l, h_sd.dopplers(), h_sd.delays(), t, grid, tx_psd), path_loss_db + blockage_db);
}

/// An interfering source beamforming towards its own destination. LOS
/// interferers reach D directly through `h_id`; NLOS ones through the relay
/// cascade H_RD Phi H_IR.
struct Interferer {
  Codeword w;
  Psd tx_psd;
  bool los = true;
  const ChannelRealization* h_id = nullptr;
  double direct_loss_db = 0.0;
  const ChannelRealization* h_ir = nullptr;
  double cascade_loss_db = 0.0;
};

inline std::vector<Psd> interference_psd(const std::vector<Interferer>& interferers, const Codeword& w_d,
                                         const RelayConfigMatrix* phi, const ChannelRealization* h_rd,
                                         const SubbandGrid& grid, double t) {
  std::vector<Psd> out;
  out.reserve(interferers.size());
  for (const auto& i : interferers) {
    if (i.los) {
      expects(i.h_id != nullptr, "interference_psd: LOS interferer without H_ID");
      out.push_back(direct_psd(i.w, w_d, *i.h_id, t, grid, i.tx_psd, i.direct_loss_db, 0.0));
    } else {
      expects(i.h_ir != nullptr && phi != nullptr && h_rd != nullptr, "interference_psd: NLOS interferer needs a relay path");
      out.push_back(relayed_psd(i.w, w_d, *phi, *i.h_ir, *h_rd, t, grid, i.tx_psd, i.cascade_loss_db));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SINR

/// Exponential effective SINR: -beta ln(mean exp(-Lambda / beta)), linear domain, returned in dB.
inline double effective_sinr(const std::vector<double>& per_subband_db, double beta = 1.0) {
  expects(!per_subband_db.empty(), "effective_sinr: empty input");
  expects(beta > 0.0, "effective_sinr: beta must be > 0");
  std::vector<double> e(per_subband_db.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = -db_to_linear(per_subband_db[i]) / beta;
    top = std::max(top, e[i]);
  }
  double acc = 0.0;
  for (double x : e) acc += std::exp(x - top);
  const double log_mean = top + std::log(acc / static_cast<double>(e.size()));
  const double lin = -beta * log_mean;
  // Keep rounding from pushing the result outside the per-subband envelope.
  const auto [lo, hi] = std::minmax_element(per_subband_db.begin(), per_subband_db.end());
  return std::clamp(linear_to_db(std::max(lin, 0.0)), *lo, *hi);
}

/// Lambda(f) = rx(f) / (sum interf(f) + noise(f) + af_noise / B).
inline SinrReport sinr_per_subband(const Psd& rx, const std::vector<Psd>& interf, const Psd& noise, double af_noise_w = 0.0,
                                   double t = 0.0, double beta = 1.0) {
  expects(rx.grid.same_as(noise.grid) && rx.values.size() == noise.values.size(), "sinr_per_subband: grid mismatch");
  for (const auto& i : interf)
    expects(i.grid.same_as(rx.grid) && i.values.size() == rx.values.size(), "sinr_per_subband: grid mismatch");
  const double af_psd = af_noise_w / rx.grid.bandwidth();
  SinrReport rep;
  rep.timestamp = t;
  rep.per_subband_db.resize(rx.values.size());
  for (std::size_t k = 0; k < rx.values.size(); ++k) {
    double den = noise.values[k] + af_psd;
    for (const auto& i : interf) den += i.values[k];
    rep.per_subband_db[k] = linear_to_db(rx.values[k] / den);
  }
  rep.effective_db = effective_sinr(rep.per_subband_db, beta);
  return rep;
}

}  // namespace relaysim
