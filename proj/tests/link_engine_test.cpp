#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "relaysim/link_engine.hpp"
#include "relaysim/simcore.hpp"

using namespace relaysim;

namespace {

struct Instance {
  ArrayGeometry gnb, relay, ue;
  ClusterSet cs_sr, cs_rd;
  ChannelRealization h_sr, h_rd;
};

Instance make_instance(Rng& rng, int relay_rows, int relay_cols, int n_clusters = 2) {
  Instance x;
  x.gnb = fixtures::random_array(rng, 2, 2, true);
  x.relay = fixtures::random_array(rng, relay_rows, relay_cols);
  x.ue = fixtures::random_array(rng, 1, 2);
  x.cs_sr = fixtures::random_clusters(rng, n_clusters, 3);
  x.cs_rd = fixtures::random_clusters(rng, n_clusters, 3);
  x.h_sr = assemble_channel(x.cs_sr, x.gnb, x.relay, 28e9);
  x.h_rd = assemble_channel(x.cs_rd, x.relay, x.ue, 28e9);
  return x;
}

Codebook random_codebook(Rng& rng, int size, int dim) {
  Codebook cb;
  for (int i = 0; i < size; ++i) cb.codewords.push_back({fixtures::random_unit(rng, dim)});
  return cb;
}

std::vector<CVector> columns(const Codebook& cb) {
  std::vector<CVector> v;
  for (const auto& w : cb.codewords) v.push_back(w.weights);
  return v;
}

double objective(const Codebook& cb_s, const Codebook& cb_d, const RelayConfigMatrix& phi, const Instance& x,
                 const LinkBudget& b, std::size_t s, std::size_t d) {
  const CVector v = phi.apply(x.h_rd.long_term_apply_transpose(cb_d[d].weights));
  const Complex y = v.cwiseProduct(x.h_sr.long_term_apply(cb_s[s].weights)).sum();
  return b.signal_gain * std::norm(y) / (b.noise_w + b.relay_noise_gain * v.squaredNorm());
}

}  // namespace

TEST(Sweep, SingletonCodebooks) {
  Rng rng(1);
  const auto x = make_instance(rng, 2, 2);
  const auto cb_s = random_codebook(rng, 1, 4), cb_d = random_codebook(rng, 1, 2);
  const std::vector<RelayConfigMatrix> phi{irs_matrix(fixtures::random_phases(rng, 4))};
  const auto r = sweep(cb_s, cb_d, std::span<const RelayConfigMatrix>(phi), x.h_sr, x.h_rd, LinkBudget{});
  EXPECT_EQ(r.w_s_idx, 0u);
  EXPECT_EQ(r.w_d_idx, 0u);
  EXPECT_EQ(r.phi_idx, 0u);
}

class SweepOracle : public ::testing::TestWithParam<RelayKind> {};

TEST_P(SweepOracle, MatchesExhaustiveEnumerationOn3x3x3) {
  const RelayKind kind = GetParam();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    const auto x = make_instance(rng, 2, 2);
    const auto cb_s = random_codebook(rng, 3, 4), cb_d = random_codebook(rng, 3, 2);
    const double gain = kind == RelayKind::AF ? 40.0 : 0.0;
    std::vector<RelayConfigMatrix> phis;
    std::vector<CMatrix> dense;
    for (int p = 0; p < 3; ++p) {
      phis.push_back({kind, fixtures::random_phases(rng, 4), gain});
      dense.push_back(oracle::dense_phi(phis.back()));
    }
    const LinkBudget b{1.0, uniform(rng, 0.1, 2.0), kind == RelayKind::AF ? uniform(rng, 1e-5, 1e-3) : 0.0};
    const auto ref = oracle::exhaustive_sweep(columns(cb_s), columns(cb_d), dense, oracle::sum(oracle::cluster_matrices(x.cs_sr, x.gnb, x.relay)),
                                              oracle::sum(oracle::cluster_matrices(x.cs_rd, x.relay, x.ue)), b.signal_gain,
                                              b.noise_w, b.relay_noise_gain);
    const auto got = sweep(cb_s, cb_d, std::span<const RelayConfigMatrix>(phis), x.h_sr, x.h_rd, b);
    EXPECT_EQ(std::tie(got.w_s_idx, got.w_d_idx, got.phi_idx), std::tie(ref.s, ref.d, ref.p)) << "seed " << seed;
    EXPECT_NEAR(got.predicted_snr_db, linear_to_db(ref.value), 1e-9);

    // Same three configurations as a lazy codebook (3 incidence bins, 1 departure bin).
    ArrayGeometry panel = x.relay;
    const RelayCodebook lazy(kind, panel, {3, 1}, {1, 1}, gain);
    std::vector<CMatrix> lazy_dense;
    for (std::size_t p = 0; p < lazy.size(); ++p) lazy_dense.push_back(oracle::dense_phi(lazy[p]));
    const auto ref2 = oracle::exhaustive_sweep(columns(cb_s), columns(cb_d), lazy_dense,
                                               oracle::sum(oracle::cluster_matrices(x.cs_sr, x.gnb, x.relay)),
                                               oracle::sum(oracle::cluster_matrices(x.cs_rd, x.relay, x.ue)),
                                               b.signal_gain, b.noise_w, b.relay_noise_gain);
    const auto got2 = sweep(cb_s, cb_d, lazy, x.h_sr, x.h_rd, b);
    EXPECT_EQ(std::tie(got2.w_s_idx, got2.w_d_idx, got2.phi_idx), std::tie(ref2.s, ref2.d, ref2.p)) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, SweepOracle, ::testing::Values(RelayKind::IRS, RelayKind::AF));

TEST(Sweep, FftPathFindsTheExhaustiveOptimum) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed + 77);
    const RelayKind kind = seed % 2 ? RelayKind::AF : RelayKind::IRS;
    const auto x = make_instance(rng, 2, 3, 3);
    const Codebook cb_s = build_codebook(x.gnb, 4, 4), cb_d = build_codebook(x.ue, 4, 2);
    const RelayCodebook cb(kind, x.relay, {5, 3}, {5, 3}, kind == RelayKind::AF ? 40.0 : 0.0);
    ASSERT_TRUE(cb.dft_structured());
    const LinkBudget b{1.0, 0.5, kind == RelayKind::AF ? 1e-4 : 0.0};
    const auto fast = sweep(cb_s, cb_d, cb, x.h_sr, x.h_rd, b);
    const auto all = cb.materialize();
    const auto slow = sweep(cb_s, cb_d, std::span<const RelayConfigMatrix>(all), x.h_sr, x.h_rd, b);
    const double v_fast = objective(cb_s, cb_d, cb[fast.phi_idx], x, b, fast.w_s_idx, fast.w_d_idx);
    const double v_slow = objective(cb_s, cb_d, all[slow.phi_idx], x, b, slow.w_s_idx, slow.w_d_idx);
    EXPECT_NEAR(v_fast, v_slow, 1e-9 * v_slow) << "seed " << seed;
    EXPECT_NEAR(fast.predicted_snr_db, slow.predicted_snr_db, 1e-8);
  }
}

TEST(Sweep, CommonScalingKeepsArgmax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 5);
    auto x = make_instance(rng, 2, 2);
    const auto cb_s = random_codebook(rng, 4, 4), cb_d = random_codebook(rng, 3, 2);
    const auto phis = relay_codebook(RelayKind::IRS, x.relay, 4, 4);
    const auto a = sweep(cb_s, cb_d, std::span<const RelayConfigMatrix>(phis), x.h_sr, x.h_rd, LinkBudget{});
    for (auto* cs : {&x.cs_sr, &x.cs_rd})
      for (auto& c : cs->clusters) c.power *= 100.0;
    const auto h_sr = assemble_channel(x.cs_sr, x.gnb, x.relay, 28e9);
    const auto h_rd = assemble_channel(x.cs_rd, x.relay, x.ue, 28e9);
    const auto b = sweep(cb_s, cb_d, std::span<const RelayConfigMatrix>(phis), h_sr, h_rd, LinkBudget{});
    EXPECT_EQ(std::tie(a.w_s_idx, a.w_d_idx, a.phi_idx), std::tie(b.w_s_idx, b.w_d_idx, b.phi_idx));
    EXPECT_NEAR(b.predicted_snr_db - a.predicted_snr_db, 40.0, 1e-9);
  }
}

TEST(LongTerm, ScalarCase) {
  ClusterSet sr, rd;
  sr.clusters.push_back({1.0, 0.0, 0.0, {RayParams{0.2, 1.4, 1.0, 1.6, 0.3}}});
  rd.clusters.push_back({1.0, 0.0, 0.0, {RayParams{-0.2, 1.5, 2.0, 1.5, -1.1}}});
  ArrayGeometry one;
  const auto h_sr = assemble_channel(sr, one, one, 28e9), h_rd = assemble_channel(rd, one, one, 28e9);
  const auto phi = af_matrix({0.8}, 20.0);
  const CMatrix l = long_term({CVector::Ones(1)}, {CVector::Ones(1)}, phi, h_sr, h_rd);
  ASSERT_EQ(l.rows(), 1);
  const Complex ref = h_rd.cluster_matrix(0)(0, 0) * phi.diagonal()[0] * h_sr.cluster_matrix(0)(0, 0);
  EXPECT_NEAR(std::abs(l(0, 0) - ref), 0.0, 1e-14);
}

TEST(LongTerm, PassThroughRelay) {
  // H_RD with a single broadside ray at zero phase on a 1x1 panel and 1x1 UE
  // is the scalar 1, so L[0, m] = w_D^T H_SR,m w_S.
  Rng rng(9);
  ClusterSet rd;
  rd.clusters.push_back({1.0, 0.0, 0.0, {RayParams{0.0, kPi / 2, kPi, kPi / 2, 0.0}}});
  ArrayGeometry one, ue;
  ue.boresight_az = kPi;
  const auto gnb = fixtures::random_array(rng, 2, 2);
  const auto cs_sr = fixtures::random_clusters(rng, 3, 2);
  const auto h_sr = assemble_channel(cs_sr, gnb, one, 28e9);
  const auto h_rd = assemble_channel(rd, one, ue, 28e9);
  const Codeword w_s{fixtures::random_unit(rng, 4)};
  const CMatrix l = long_term(w_s, {CVector::Ones(1)}, irs_matrix({0.0}), h_sr, h_rd);
  for (std::size_t m = 0; m < h_sr.n_clusters(); ++m)
    EXPECT_NEAR(std::abs(l(0, static_cast<Eigen::Index>(m)) - (h_sr.cluster_matrix(m) * w_s.weights)(0)), 0.0, 1e-14);
}

TEST(LongTerm, MatchesQuadrupleSumOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 300);
    Instance x;
    x.gnb = fixtures::random_array(rng, 2, 2, true);
    x.relay = fixtures::random_array(rng, 2, 2);
    x.ue = fixtures::random_array(rng, 2, 2);
    x.cs_sr = fixtures::random_clusters(rng, 2, 3);
    x.cs_rd = fixtures::random_clusters(rng, 2, 3);
    const auto h_sr = assemble_channel(x.cs_sr, x.gnb, x.relay, 28e9);
    const auto h_rd = assemble_channel(x.cs_rd, x.relay, x.ue, 28e9);
    const Codeword w_s{fixtures::random_unit(rng, 4)}, w_d{fixtures::random_unit(rng, 4)};
    const auto phi = af_matrix(fixtures::random_phases(rng, 4), 13.0);
    const CMatrix ref = oracle::long_term(w_s.weights, w_d.weights, oracle::dense_phi(phi),
                                          oracle::cluster_matrices(x.cs_sr, x.gnb, x.relay),
                                          oracle::cluster_matrices(x.cs_rd, x.relay, x.ue));
    EXPECT_LT(fixtures::rel_err(long_term(w_s, w_d, phi, h_sr, h_rd), ref), 1e-12) << "seed " << seed;
  }
}

TEST(SmallScale, SinglePairIsFlat) {
  const auto g = SubbandGrid::uniform(100e6, 50);
  const auto tx = flat_tx_psd(g, 33.0);
  CMatrix l(1, 1);
  l(0, 0) = Complex(0.3, -0.4);
  const auto p = small_scale_psd(l, {0.0}, {0.0}, {1e-7}, {3e-8}, 0.25, g, tx);
  for (std::size_t k = 0; k < p.values.size(); ++k) EXPECT_NEAR(p.values[k], tx.values[k] * 0.25, 1e-15 * tx.values[k]);
}

TEST(SmallScale, TwoTapsGiveFrequencySelectivity) {
  const auto g = SubbandGrid::uniform(100e6, 50);
  const auto tx = Psd::flat(g, 1.0);
  CMatrix l(2, 1);
  l(0, 0) = 1.0;
  l(1, 0) = 1.0;
  const double span = g.bandwidth();
  const auto p = small_scale_psd(l, {0.0, 0.0}, {0.0}, {0.0, 1.0 / (2.0 * span)}, {0.0}, 0.0, g, tx);
  // |1 + e^{j pi f / span}|^2 = 2 + 2 cos(pi f / span)
  for (int k = 0; k < g.n_subbands; ++k) {
    const double f = g.center_freqs[static_cast<std::size_t>(k)];
    EXPECT_NEAR(p.values[static_cast<std::size_t>(k)], 2.0 + 2.0 * std::cos(kPi * f / span), 1e-12);
  }
  const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
  EXPECT_LT(*lo, *hi);
}

TEST(SmallScale, ZeroDopplerIsTimeInvariant) {
  Rng rng(4);
  const auto g = SubbandGrid::uniform(100e6, 10);
  const auto tx = Psd::flat(g, 2.0);
  CMatrix l(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) l(i, j) = {standard_normal(rng), standard_normal(rng)};
  const std::vector<double> d_rd{0, 1e-8, 5e-8}, d_sr{2e-8, 9e-8};
  const auto a = small_scale_psd(l, {0, 0, 0}, {0, 0}, d_rd, d_sr, 0.0, g, tx);
  const auto b = small_scale_psd(l, {0, 0, 0}, {0, 0}, d_rd, d_sr, 17.3, g, tx);
  EXPECT_EQ(a.values, b.values);
  const auto c = small_scale_psd(l, {0, 0, 0}, {0, 0}, {0, 0, 0}, {0, 0}, 3.0, g, tx);
  for (double v : c.values) EXPECT_NEAR(v, 2.0 * std::norm(l.sum()), 1e-12);
  const auto moving = small_scale_psd(l, {120.0, -40.0, 0}, {0, 300.0}, d_rd, d_sr, 1e-3, g, tx);
  EXPECT_NE(moving.values, a.values);
}

TEST(Cascade, Examples) {
  const auto los = default_path_loss(Environment::UmaLos), nlos = default_path_loss(Environment::UmaNlos);
  EXPECT_DOUBLE_EQ(cascade_gain_db(1.0, 1.0, 1.0, los, los), 2 * los.b);
  EXPECT_NEAR(cascade_gain_db(100.0, 100.0, 28.0, los, los), 201.88, 0.01);
  EXPECT_DOUBLE_EQ(cascade_gain_db(80.0, 230.0, 28.0, los, nlos), cascade_gain_db(230.0, 80.0, 28.0, nlos, los));
  EXPECT_DOUBLE_EQ(cascade_gain_db(80.0, 230.0, 28.0, los, los), cascade_gain_db(230.0, 80.0, 28.0, los, los));
}

TEST(DirectPsd, ScalarChannelAndBlockage) {
  ClusterSet cs;
  cs.clusters.push_back({1.0, 2e-8, 0.0, {RayParams{0.1, 1.5, 2.0, 1.5, 0.4}}});
  ArrayGeometry one;
  const auto h = assemble_channel(cs, one, one, 28e9);
  const auto g = SubbandGrid::uniform(100e6, 8);
  const auto tx = flat_tx_psd(g, 30.0);
  const Codeword ws{CVector::Constant(1, Complex(0.0, 1.0))}, wd{CVector::Constant(1, Complex(1.0, 0.0))};
  const auto p = direct_psd(ws, wd, h, 0.0, g, tx, 100.0, 0.0);
  const double h2 = std::norm(h.cluster_matrix(0)(0, 0));
  for (std::size_t k = 0; k < p.values.size(); ++k) EXPECT_NEAR(p.values[k], tx.values[k] * h2 * 1e-10, 1e-12 * p.values[k]);
  const auto blocked = direct_psd(ws, wd, h, 0.0, g, tx, 100.0, 40.0);
  for (std::size_t k = 0; k < p.values.size(); ++k) EXPECT_NEAR(p.values[k] / blocked.values[k], 1e4, 1e-8);
}

TEST(Interference, EmptyListAndBundledScenarios) {
  const auto g = SubbandGrid::uniform(100e6, 4);
  EXPECT_TRUE(interference_psd({}, {CVector::Ones(1)}, nullptr, nullptr, g, 0.0).empty());
  const auto sc = load_scenario(std::string(RELAYSIM_DATA_DIR) + "/scenario2.json");
  EXPECT_EQ(sc.scenario.with_role(NodeRole::Gnb).size(), 1u);
}

TEST(Interference, IdenticalInterfererEqualsServingPsd) {
  Rng rng(12);
  const auto x = make_instance(rng, 2, 2);
  const auto g = SubbandGrid::uniform(100e6, 12);
  const auto tx = flat_tx_psd(g, 33.0);
  const Codeword ws{fixtures::random_unit(rng, 4)}, wd{fixtures::random_unit(rng, 2)};
  const auto phi = irs_matrix(fixtures::random_phases(rng, 4));
  const auto serving = relayed_psd(ws, wd, phi, x.h_sr, x.h_rd, 0.0, g, tx, 180.0);
  Interferer it{ws, tx, false, nullptr, 0.0, &x.h_sr, 180.0};
  const auto out = interference_psd({it}, wd, &phi, &x.h_rd, g, 0.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].values, serving.values);
}

TEST(Interference, TwoSourcesAreAdditive) {
  Rng rng(13);
  const auto x = make_instance(rng, 2, 2);
  const auto g = SubbandGrid::uniform(100e6, 12);
  const auto ue = x.ue;
  const auto a1 = fixtures::random_array(rng, 2, 2), a2 = fixtures::random_array(rng, 1, 3);
  const auto h1 = assemble_channel(fixtures::random_clusters(rng, 3, 2), a1, ue, 28e9);
  const auto h2 = assemble_channel(fixtures::random_clusters(rng, 3, 2), a2, ue, 28e9);
  const auto h2r = assemble_channel(fixtures::random_clusters(rng, 3, 2), a2, x.relay, 28e9);
  const Codeword w1{fixtures::random_unit(rng, 4)}, w2{fixtures::random_unit(rng, 3)}, wd{fixtures::random_unit(rng, 2)};
  const auto phi = irs_matrix(fixtures::random_phases(rng, 4));
  const auto tx1 = flat_tx_psd(g, 30.0), tx2 = flat_tx_psd(g, 36.0);
  const std::vector<Interferer> list{{w1, tx1, true, &h1, 120.0, nullptr, 0.0}, {w2, tx2, false, &h2, 0.0, &h2r, 190.0}};
  const auto out = interference_psd(list, wd, &phi, &x.h_rd, g, 0.0);
  const auto r1 = direct_psd(w1, wd, h1, 0.0, g, tx1, 120.0, 0.0);
  const auto r2 = relayed_psd(w2, wd, phi, h2r, x.h_rd, 0.0, g, tx2, 190.0);
  const Psd noise = noise_psd(g);
  const Psd rx = Psd::flat(g, 1e-15);
  const auto rep = sinr_per_subband(rx, out, noise);
  for (std::size_t k = 0; k < g.center_freqs.size(); ++k) {
    EXPECT_DOUBLE_EQ(out[0].values[k], r1.values[k]);
    EXPECT_DOUBLE_EQ(out[1].values[k], r2.values[k]);
    const double ref = 1e-15 / (noise.values[k] + r1.values[k] + r2.values[k]);
    EXPECT_NEAR(rep.per_subband_db[k], linear_to_db(ref), 1e-9);
  }
}

TEST(Sinr, NoiseOnlyAndDoubling) {
  const auto g = SubbandGrid::uniform(100e6, 20);
  const auto n = noise_psd(g, 9.0);
  const auto r0 = sinr_per_subband(n, {}, n);
  for (double v : r0.per_subband_db) EXPECT_NEAR(v, 0.0, 1e-12);
  Psd twice = n;
  for (auto& v : twice.values) v *= 2.0;
  const auto r1 = sinr_per_subband(twice, {}, n);
  for (double v : r1.per_subband_db) EXPECT_NEAR(v, 10.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(r1.effective_db, 10.0 * std::log10(2.0), 1e-12);
}

TEST(Sinr, AfGainCappedByRelayedNoise) {
  Rng rng(17);
  const auto x = make_instance(rng, 2, 2);
  const auto g = SubbandGrid::uniform(100e6, 10);
  const auto tx = flat_tx_psd(g, 33.0);
  const auto noise = noise_psd(g, 9.0);
  const Codeword ws{fixtures::random_unit(rng, 4)}, wd{fixtures::random_unit(rng, 2)};
  const auto ph = fixtures::random_phases(rng, 4);
  for (double rd_loss : {60.0, 90.0, 140.0}) {
    const double cascade = 70.0 + rd_loss;
    const RelayNoise rn = RelayNoise::thermal(100e6, 5.0);
    auto eval = [&](double gain_db) {
      const auto phi = af_matrix(ph, gain_db);
      const auto rx = relayed_psd(ws, wd, phi, x.h_sr, x.h_rd, 0.0, g, tx, cascade);
      const double af = af_relayed_noise_power(wd, x.h_rd, phi, rn) / db_to_linear(rd_loss);
      return sinr_per_subband(rx, {}, noise, af).effective_db;
    };
    const double gain = eval(40.0) - eval(0.0);
    EXPECT_LE(gain, 40.0 + 1e-9);
    if (rd_loss >= 140.0) EXPECT_NEAR(gain, 40.0, 0.01);  // relayed noise far below thermal
    if (rd_loss <= 60.0) EXPECT_LT(gain, 39.0);
  }
}

TEST(Eesm, Examples) {
  EXPECT_NEAR(effective_sinr({7.5, 7.5, 7.5}), 7.5, 1e-9);
  EXPECT_NEAR(effective_sinr({0.0, 20.0}, 1.0), 2.29, 0.005);
  EXPECT_NEAR(effective_sinr({0.0, 20.0}, 1.0), oracle::eesm_db({0.0, 20.0}, 1.0), 1e-9);
}

TEST(Eesm, EnvelopeAndOracle) {
  Rng rng(23);
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> db(1 + static_cast<std::size_t>(uniform(rng, 0, 60)));
    for (auto& v : db) v = uniform(rng, -30.0, 35.0);
    const double beta = std::exp(uniform(rng, std::log(0.3), std::log(40.0)));
    const double e = effective_sinr(db, beta);
    const auto [lo, hi] = std::minmax_element(db.begin(), db.end());
    EXPECT_GE(e, *lo);
    EXPECT_LE(e, *hi);
    const double ref = oracle::eesm_db(db, beta);
    if (std::isfinite(ref) && ref > *lo + 1e-6) EXPECT_NEAR(e, ref, 1e-6);
  }
}

TEST(GlobalPhase, PsdsAreInvariant) {
  Rng rng(31);
  const auto x = make_instance(rng, 2, 3);
  const auto g = SubbandGrid::uniform(100e6, 16);
  const auto tx = flat_tx_psd(g, 33.0);
  const Codeword ws{fixtures::random_unit(rng, 4)}, wd{fixtures::random_unit(rng, 2)};
  auto ph = fixtures::random_phases(rng, 6);
  const auto base = relayed_psd(ws, wd, af_matrix(ph, 10.0), x.h_sr, x.h_rd, 0.01, g, tx, 150.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Complex a = std::polar(1.0, uniform(rng, -kPi, kPi)), b = std::polar(1.0, uniform(rng, -kPi, kPi));
    const double c = uniform(rng, -kPi, kPi);
    auto ph2 = ph;
    for (auto& p : ph2) p += c;
    const Codeword ws2{ws.weights * a}, wd2{wd.weights * b};
    const auto rot = relayed_psd(ws2, wd2, af_matrix(ph2, 10.0), x.h_sr, x.h_rd, 0.01, g, tx, 150.0);
    for (std::size_t k = 0; k < base.values.size(); ++k) EXPECT_NEAR(rot.values[k], base.values[k], 1e-12 * base.values[k]);
    const Codeword wr{fixtures::random_unit(rng, 6)};
    const auto d1 = direct_psd(ws, wr, x.h_sr, 0.0, g, tx, 90.0, 0.0);
    const auto d2 = direct_psd(ws2, {wr.weights * b}, x.h_sr, 0.0, g, tx, 90.0, 0.0);
    for (std::size_t k = 0; k < d1.values.size(); ++k) EXPECT_NEAR(d2.values[k], d1.values[k], 1e-12 * d1.values[k]);
    const double n1 = af_relayed_noise_power(wd, x.h_rd, af_matrix(ph, 10.0), RelayNoise::thermal(1e8));
    const double n2 = af_relayed_noise_power(wd2, x.h_rd, af_matrix(ph2, 10.0), RelayNoise::thermal(1e8));
    EXPECT_NEAR(n2, n1, 1e-12 * n1);
  }
}

TEST(Pipeline, GnbOnlyBaselineIsDeepBelowZero) {
  RunConfig c;
  c.scenario_path = std::string(RELAYSIM_DATA_DIR) + "/scenario1.json";
  c.relay_override = "none";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.seed = seed;
    for (const auto& [ue, r] : snapshot(c)) EXPECT_LT(r.effective_db, -10.0) << "seed " << seed;
  }
}
