#include "oracles.hpp"
#include "risbr/model.hpp"
#include "risbr/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace risbr;

namespace {

// Random instance with unit noise and O(1) channels.
Scenario random_instance(Rng& rng, std::size_t n, std::size_t m, std::size_t l_count, double spare_fraction = 1.0) {
  SystemParams p;
  p.antennas = n;
  p.ris_elements = m;
  p.surviving_bs = l_count;
  p.max_power = 2.0;
  p.noise_power = 1.0;
  ChannelSet ch;
  ch.to_ris = sample_cn(rng, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t l = 0; l < l_count; ++l) {
    ch.direct.push_back(sample_cn(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    ch.from_ris.push_back(0.5 * sample_cn(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)));
  }
  std::vector<double> local(l_count, (1.0 - spare_fraction) * p.bbu_capacity);
  return make_scenario(p, std::move(ch), 0.5 * p.bbu_capacity, local);
}

std::vector<bool> flags(const Selection& s) {
  std::vector<bool> out(s.bs_count());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = s.contains(l);
  return out;
}

PrecoderSet random_w(const Scenario& sc, const Selection& sel, Rng& rng) {
  PrecoderSet w = PrecoderSet::zeros(sc.surviving(), sc.antennas());
  for (auto l : sel.members()) w[l] = sample_cn(rng, static_cast<Eigen::Index>(sc.antennas()), 1);
  return w;
}

}  // namespace

TEST(Selection, Basics) {
  Selection s(4, {1, 3});
  EXPECT_EQ(s.count(), 2u);
  EXPECT_TRUE(s.contains(3));
  EXPECT_FALSE(s.contains(0));
  EXPECT_EQ(s.members(), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(Selection::all(3).count(), 3u);
  EXPECT_TRUE(Selection(3).empty());
  EXPECT_THROW(Selection(2, {2}), InvalidInput);
}

TEST(PhaseConfig, RandomIsUnitModulus) {
  Rng rng(1);
  EXPECT_LE(PhaseConfig::random(512, rng).max_modulus_error(), 1e-12);
  EXPECT_EQ(PhaseConfig::ones(3).max_modulus_error(), 0.0);
}

TEST(EffectiveChannel, NoRisIsDirect) {
  Rng rng(2);
  const Scenario sc = random_instance(rng, 3, 0, 2);
  EXPECT_EQ(effective_channel(sc, 1, PhaseConfig::zeros(0)), sc.channels.direct[1]);
}

TEST(EffectiveChannel, ZeroReflectorIsDirect) {
  Rng rng(3);
  Scenario sc = random_instance(rng, 3, 4, 2);
  sc.channels.from_ris[0].setZero();
  EXPECT_EQ(effective_channel(sc, 0, PhaseConfig::random(4, rng)), sc.channels.direct[0]);
}

TEST(EffectiveChannel, MatchesTripleLoop) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = random_instance(rng, 3, 6, 2);
    const PhaseConfig phi = PhaseConfig::random(6, rng);
    const CMatrix ref = oracle::effective_channel(sc, 1, phi.phi);
    EXPECT_LE((effective_channel(sc, 1, phi) - ref).norm(), 1e-12 * ref.norm());
  }
}

TEST(Cascade, ZeroPrecoder) {
  Rng rng(5);
  const Scenario sc = random_instance(rng, 2, 4, 2);
  const Cascade c = cascade_coefficients(sc, 0, sample_cn(rng, 2, 1), CVector::Zero(2));
  EXPECT_EQ(c.a, Complex(0.0));
  EXPECT_EQ(c.b.norm(), 0.0);
}

TEST(Cascade, ZeroPhaseGivesDirectTerm) {
  Rng rng(6);
  const Scenario sc = random_instance(rng, 2, 4, 2);
  const CVector y = sample_cn(rng, 2, 1), w = sample_cn(rng, 2, 1);
  const Cascade c = cascade_coefficients(sc, 1, y, w);
  EXPECT_NEAR(std::abs(c.a - y.dot(sc.channels.direct[1] * w)), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(y.dot(effective_channel(sc, 1, PhaseConfig::zeros(4)) * w) - c.a), 0.0, 1e-13);
}

TEST(Cascade, IdentityOnRandomTriples) {
  Rng rng(7);
  const Scenario sc = random_instance(rng, 4, 32, 3);
  for (int t = 0; t < 50; ++t) {
    const CVector y = sample_cn(rng, 4, 1), w = sample_cn(rng, 4, 1);
    const CVector phi = sample_cn(rng, 32, 1);  // identity holds for any phi, not only unit modulus
    const Cascade c = cascade_coefficients(sc, 2, y, w);
    const Complex direct = y.dot(oracle::effective_channel(sc, 2, phi) * w);
    const double scale = y.norm() * w.norm() *
                         (sc.channels.direct[2].norm() + sc.channels.from_ris[2].norm() * sc.channels.to_ris.norm()) *
                         (1.0 + phi.norm());
    EXPECT_LE(std::abs(c.a + c.b.dot(phi) - direct), 1e-12 * scale);
  }
}

TEST(Covariance, NoiseOnlyCases) {
  Rng rng(8);
  const Scenario sc = random_instance(rng, 3, 4, 3);
  const PhaseConfig phi = PhaseConfig::random(4, rng);
  const Selection one(3, {1});
  const CMatrix noise = CMatrix::Identity(3, 3);
  EXPECT_EQ(interference_covariance(sc, 1, phi, random_w(sc, one, rng), one), noise);
  const Selection all = Selection::all(3);
  EXPECT_EQ(interference_covariance(sc, 0, phi, PrecoderSet::zeros(3, 3), all), noise);
}

TEST(Covariance, MatchesNaiveSummation) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = random_instance(rng, 3, 5, 2);
    const Selection sel = Selection::all(2);
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(5, rng);
    const CMatrix ref = oracle::covariance(sc, 0, oracle::effective_channel(sc, 0, phi.phi), w.w, flags(sel));
    const CMatrix got = interference_covariance(sc, 0, phi, w, sel);
    EXPECT_LE((got - ref).norm(), 1e-12 * ref.norm());
    EXPECT_LE((got - got.adjoint()).norm(), 1e-12 * got.norm());
  }
}

TEST(Rate, SisoReduction) {
  Rng rng(10);
  const Scenario sc = random_instance(rng, 1, 0, 1);
  PrecoderSet w = PrecoderSet::zeros(1, 1);
  w[0](0) = Complex(0.3, -1.1);
  const double h2 = std::norm(sc.channels.direct[0](0, 0));
  const double expected = sc.params.bandwidth * std::log2(1.0 + h2 * std::norm(w[0](0)) / sc.params.noise_power);
  EXPECT_NEAR(achievable_rate(sc, 0, PhaseConfig::zeros(0), w, Selection::all(1)), expected, 1e-9 * expected);
}

TEST(Rate, ZeroPrecoderGivesZero) {
  Rng rng(11);
  const Scenario sc = random_instance(rng, 2, 3, 2);
  EXPECT_EQ(achievable_rate(sc, 0, PhaseConfig::random(3, rng), PrecoderSet::zeros(2, 2), Selection::all(2)), 0.0);
}

TEST(Rate, MatchesExplicitTwoByTwoInverse) {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const Scenario sc = random_instance(rng, 2, 4, 2);
    const Selection sel = Selection::all(2);
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(4, rng);
    for (std::size_t l = 0; l < 2; ++l) {
      const CMatrix h = oracle::effective_channel(sc, l, phi.phi);
      const CMatrix r = oracle::covariance(sc, l, h, w.w, {true, true});
      const Complex det = r(0, 0) * r(1, 1) - r(0, 1) * r(1, 0);
      CMatrix inv(2, 2);
      inv << r(1, 1), -r(0, 1), -r(1, 0), r(0, 0);
      inv /= det;
      const CVector s = h * w[l];
      const double ref = sc.params.bandwidth * std::log2(1.0 + (s.adjoint() * inv * s)(0, 0).real());
      EXPECT_NEAR(achievable_rate(sc, l, phi, w, sel), ref, 1e-9 * ref);
    }
  }
}

TEST(Rate, IncreasesWithPowerForSingleBs) {
  Rng rng(13);
  const Scenario sc = random_instance(rng, 3, 4, 2);
  const Selection sel(2, {0});
  PrecoderSet w = random_w(sc, sel, rng);
  const PhaseConfig phi = PhaseConfig::random(4, rng);
  double prev = achievable_rate(sc, 0, phi, w, sel);
  for (int k = 0; k < 10; ++k) {
    w[0] *= 1.3;
    const double r = achievable_rate(sc, 0, phi, w, sel);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(TotalRedistributed, ZeroSpareGivesZero) {
  Rng rng(14);
  const Scenario sc = random_instance(rng, 2, 3, 3, 0.0);
  const Selection sel = Selection::all(3);
  EXPECT_EQ(total_redistributed(sc, PhaseConfig::random(3, rng), random_w(sc, sel, rng), sel).total, 0.0);
}

TEST(TotalRedistributed, CapBinds) {
  SystemParams p;
  p.antennas = 1;
  p.ris_elements = 0;
  p.surviving_bs = 1;
  p.noise_power = 1.0;
  ChannelSet ch;
  ch.to_ris = CMatrix(0, 1);
  ch.direct.push_back(CMatrix::Constant(1, 1, Complex(std::sqrt(3.0), 0.0)));
  ch.from_ris.push_back(CMatrix(1, 0));
  const Scenario sc = make_scenario(p, ch, 1e9, {0.6e9});  // r = 1e9 log2(1 + 3) = 2 Gbps, spare 0.4 Gbps
  PrecoderSet w = PrecoderSet::zeros(1, 1);
  w[0](0) = 1.0;
  const auto red = total_redistributed(sc, PhaseConfig::zeros(0), w, Selection::all(1));
  EXPECT_NEAR(red.rate[0], 2e9, 1e-3);
  EXPECT_NEAR(red.credited[0], 0.4e9, 1e-3);
  EXPECT_NEAR(red.total, 0.4e9, 1e-3);
}

TEST(TotalRedistributed, MatchesDirectReevaluation) {
  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = random_instance(rng, 2, 4, 3, 0.5 + 0.5 * rng.uniform());
    const Selection sel(3, {0, 2});
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(4, rng);
    const double ref = oracle::capped_total(sc, phi.phi, w.w, flags(sel));
    EXPECT_NEAR(total_redistributed(sc, phi, w, sel).total, ref, 1e-9 * ref);
  }
}

TEST(Survivability, Conventions) {
  EXPECT_EQ(survivability(2.0, 1.0), 1.0);
  EXPECT_NEAR(survivability(0.58, 1.0), 0.58, 1e-15);
  EXPECT_EQ(survivability(5.0, 0.0), 1.0);
  EXPECT_THROW(survivability(-1.0, 1.0), InvalidInput);
  EXPECT_THROW(survivability(1.0, -1.0), InvalidInput);
  double prev = 0.0;
  for (double r = 0.0; r < 3.0; r += 0.1) {
    const double s = survivability(r, 1.3);
    EXPECT_GE(s, prev);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    prev = s;
  }
}

TEST(Surrogate, ZeroAuxiliaryGivesZero) {
  Rng rng(16);
  const Scenario sc = random_instance(rng, 2, 3, 2);
  const Selection sel = Selection::all(2);
  EXPECT_EQ(surrogate_value(sc, 0, CVector::Zero(2), PhaseConfig::random(3, rng), random_w(sc, sel, rng), sel), 0.0);
}

TEST(Surrogate, TightAtMmseAuxiliary) {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const Scenario sc = random_instance(rng, 3, 4, 3);
    const Selection sel(3, {0, 1, 2});
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(4, rng);
    const AuxiliarySet aux = update_auxiliary(sc, phi, w, sel, 0.0);
    for (std::size_t l = 0; l < 3; ++l) {
      const double ref = oracle::sinr(sc, l, phi.phi, w.w, flags(sel));
      EXPECT_NEAR(surrogate_value(sc, l, aux.y[l], phi, w, sel), ref, 1e-9 * ref);
    }
  }
}

TEST(Surrogate, LowerBoundsSinrForAnyAuxiliary) {
  Rng rng(18);
  const Scenario sc = random_instance(rng, 3, 4, 2);
  const Selection sel = Selection::all(2);
  for (int t = 0; t < 1000; ++t) {
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(4, rng);
    const CVector y = sample_cn(rng, 3, 1) * (2.0 * rng.uniform());
    const double ref = oracle::sinr(sc, 1, phi.phi, w.w, {true, true});
    EXPECT_LE(surrogate_value(sc, 1, y, phi, w, sel), ref * (1.0 + 1e-12));
  }
}

TEST(Gradients, LinearTermOnlyAtZeroPrecoders) {
  Rng rng(19);
  const Scenario sc = random_instance(rng, 3, 4, 2);
  const Selection sel = Selection::all(2);
  const PhaseConfig phi = PhaseConfig::random(4, rng);
  const CVector y = sample_cn(rng, 3, 1);
  const auto g = surrogate_gradients(sc, 0, y, phi, PrecoderSet::zeros(2, 3), sel);
  const CVector ref = 2.0 * effective_channel(sc, 0, phi).adjoint() * y;
  EXPECT_LE((g.precoders[0] - ref).norm(), 1e-12 * ref.norm());
  EXPECT_EQ(g.precoders[1].norm(), 0.0);
}

TEST(Gradients, InterferencePhaseTermAtZeroPhase) {
  // with w_l = 0 only the interference terms -|a_j + b_j^H phi|^2 remain; at phi = 0 the
  // real-parameter gradient is -2 sum_j a_j b_j
  Rng rng(20);
  const Scenario sc = random_instance(rng, 2, 5, 3);
  const Selection sel = Selection::all(3);
  PrecoderSet w = random_w(sc, sel, rng);
  w[0].setZero();
  const CVector y = sample_cn(rng, 2, 1);
  const auto g = surrogate_gradients(sc, 0, y, PhaseConfig::zeros(5), w, sel);
  CVector ref = CVector::Zero(5);
  for (std::size_t j : {1, 2}) {
    const Cascade c = cascade_coefficients(sc, 0, y, w[j]);
    ref -= 2.0 * c.a * c.b;
  }
  EXPECT_LE((g.phase - ref).norm(), 1e-12 * ref.norm());
}

TEST(Gradients, CentralDifferences) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = random_instance(rng, 2, 6, 3);
    const Selection sel(3, {0, 2});
    const PrecoderSet w = random_w(sc, sel, rng);
    const PhaseConfig phi = PhaseConfig::random(6, rng);
    const CVector y = sample_cn(rng, 2, 1);
    const auto g = surrogate_gradients(sc, 2, y, phi, w, sel);
    const double h = 1e-6;
    for (std::size_t j : {0, 2})
      for (Eigen::Index i = 0; i < 2; ++i)
        for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
          PrecoderSet wp = w, wm = w;
          wp[j](i) += h * dir;
          wm[j](i) -= h * dir;
          const double fd = (surrogate_value(sc, 2, y, phi, wp, sel) - surrogate_value(sc, 2, y, phi, wm, sel)) / (2 * h);
          const double an = dir.real() != 0.0 ? g.precoders[j](i).real() : g.precoders[j](i).imag();
          EXPECT_NEAR(fd, an, 1e-5 * std::max(1.0, g.precoders[j].norm()));
        }
    for (Eigen::Index m = 0; m < 6; ++m)
      for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        PhaseConfig pp = phi, pm = phi;
        pp.phi(m) += h * dir;
        pm.phi(m) -= h * dir;
        const double fd = (surrogate_value(sc, 2, y, pp, w, sel) - surrogate_value(sc, 2, y, pm, w, sel)) / (2 * h);
        const double an = dir.real() != 0.0 ? g.phase(m).real() : g.phase(m).imag();
        EXPECT_NEAR(fd, an, 1e-5 * std::max(1.0, g.phase.norm()));
      }
  }
}

TEST(Auxiliary, ZeroPrecoderGivesZero) {
  Rng rng(22);
  const Scenario sc = random_instance(rng, 2, 3, 2);
  const AuxiliarySet aux = update_auxiliary(sc, PhaseConfig::random(3, rng), PrecoderSet::zeros(2, 2), Selection::all(2), 0.0);
  for (const auto& y : aux.y) EXPECT_EQ(y.norm(), 0.0);
}

TEST(Auxiliary, ScalarMmse) {
  Rng rng(23);
  const Scenario sc = random_instance(rng, 1, 0, 1);
  PrecoderSet w = PrecoderSet::zeros(1, 1);
  w[0](0) = Complex(0.7, 0.2);
  const AuxiliarySet aux = update_auxiliary(sc, PhaseConfig::zeros(0), w, Selection::all(1), 0.0);
  const Complex ref = sc.channels.direct[0](0, 0) * w[0](0) / sc.params.noise_power;
  EXPECT_NEAR(std::abs(aux.y[0](0) - ref), 0.0, 1e-14);
}

TEST(Auxiliary, RegularizationReachesUnselectedBs) {
  Rng rng(24);
  const Scenario sc = random_instance(rng, 2, 3, 3);
  const Selection sel(3, {0});
  const AuxiliarySet aux = update_auxiliary(sc, PhaseConfig::random(3, rng), random_w(sc, sel, rng), sel, 1e-6);
  EXPECT_NEAR(std::abs(aux.y[1](0) - Complex(1e-6, 0.0)), 0.0, 1e-20);
  EXPECT_EQ(aux.credited[1], 0.0);
}
