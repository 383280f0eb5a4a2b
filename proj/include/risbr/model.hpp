// Rate, survivability and quadratic-transform surrogate expressions.
//
// Notation: for surviving BS l the effective channel is H_eff,l = H_l + G_l diag(phi) G-tilde, the
// interference-plus-noise covariance is R_l = sigma^2 I + sum_{j in S, j != l} H_eff,l w_j w_j^H
// H_eff,l^H and the MMSE rate is B log2(1 + w_l^H H_eff,l^H R_l^{-1} H_eff,l w_l).
//
// The surrogate q_l(y) = 2 Re{y^H H_eff,l w_l} - y^H R_l y lower-bounds the SINR for every y and
// is tight at y = R_l^{-1} H_eff,l w_l.
#pragma once

#include "risbr/numerics.hpp"
#include "risbr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace risbr {

/// RIS reflection vector; Phi = diag(phi).
struct PhaseConfig {
  CVector phi;

  static PhaseConfig zeros(std::size_t m) { return {CVector::Zero(static_cast<Eigen::Index>(m))}; }
  static PhaseConfig ones(std::size_t m) { return {CVector::Ones(static_cast<Eigen::Index>(m))}; }
  static PhaseConfig random(std::size_t m, Rng& rng) {
    PhaseConfig p{CVector(static_cast<Eigen::Index>(m))};
    for (Eigen::Index i = 0; i < p.phi.size(); ++i) p.phi(i) = rng.unit_phasor();
    return p;
  }

  std::size_t size() const { return static_cast<std::size_t>(phi.size()); }

  double max_modulus_error() const {
    double err = 0.0;
    for (Eigen::Index i = 0; i < phi.size(); ++i) err = std::max(err, std::abs(std::abs(phi(i)) - 1.0));
    return err;
  }
};

/// Precoders w_l of the disconnected BS, one per surviving BS.
struct PrecoderSet {
  std::vector<CVector> w;

  static PrecoderSet zeros(std::size_t bs_count, std::size_t antennas) {
    return {std::vector<CVector>(bs_count, CVector::Zero(static_cast<Eigen::Index>(antennas)))};
  }

  std::size_t size() const { return w.size(); }
  const CVector& operator[](std::size_t l) const { return w[l]; }
  CVector& operator[](std::size_t l) { return w[l]; }

  double total_power() const {
    double p = 0.0;
    for (const auto& v : w) p += v.squaredNorm();
    return p;
  }
};

/// Receiving-BS indicator set beta.
class Selection {
 public:
  Selection() = default;
  explicit Selection(std::size_t bs_count) : active_(bs_count, false) {}
  Selection(std::size_t bs_count, const std::vector<std::size_t>& members) : active_(bs_count, false) {
    for (auto l : members) {
      if (l >= bs_count) throw InvalidInput("Selection: member index out of range");
      active_[l] = true;
    }
  }
  static Selection all(std::size_t bs_count) {
    Selection s(bs_count);
    s.active_.assign(bs_count, true);
    return s;
  }

  std::size_t bs_count() const { return active_.size(); }
  bool contains(std::size_t l) const { return active_[l]; }
  void set(std::size_t l, bool on) { active_[l] = on; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true)); }
  bool empty() const { return count() == 0; }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < active_.size(); ++l)
      if (active_[l]) out.push_back(l);
    return out;
  }

  bool operator==(const Selection&) const = default;

 private:
  std::vector<bool> active_;
};

/// Quadratic-transform auxiliaries and the epigraph bookkeeping around them.
struct AuxiliarySet {
  std::vector<CVector> y;       ///< y_l, one per surviving BS
  std::vector<double> t;        ///< SINR epigraph variables, t_l = q_l at the current point
  std::vector<double> rate;     ///< r_l [bit/s]
  std::vector<double> credited; ///< f_l = beta_l min(r_l, C_0 - C_l) [bit/s]
  double total = 0.0;           ///< R = sum f_l
};

// *=== channel ===*

/// H_l + G_l diag(phi) G-tilde.
inline CMatrix effective_channel(const Scenario& sc, std::size_t l, const PhaseConfig& phase) {
  const auto& ch = sc.channels;
  if (sc.ris_elements() == 0) return ch.direct[l];
  if (phase.size() != sc.ris_elements()) throw InvalidInput("effective_channel: phase length != M");
  return ch.direct[l] + ch.from_ris[l] * phase.phi.asDiagonal() * ch.to_ris;
}

inline std::vector<CMatrix> effective_channels(const Scenario& sc, const PhaseConfig& phase) {
  std::vector<CMatrix> out;
  out.reserve(sc.surviving());
  for (std::size_t l = 0; l < sc.surviving(); ++l) out.push_back(effective_channel(sc, l, phase));
  return out;
}

/// y^H H_eff,l(phi) w = a + b^H phi for all phi.
struct Cascade {
  Complex a;
  CVector b;
};

inline Cascade cascade_coefficients(const Scenario& sc, std::size_t l, const CVector& y, const CVector& w) {
  const auto& ch = sc.channels;
  Cascade c;
  c.a = y.dot(ch.direct[l] * w);
  if (sc.ris_elements() == 0) {
    c.b = CVector(0);
    return c;
  }
  // y^H G_l diag(G~ w) phi = sum_m conj(u_m) v_m phi_m with u = G_l^H y, v = G~ w
  const CVector u = ch.from_ris[l].adjoint() * y;
  const CVector v = ch.to_ris * w;
  c.b = u.cwiseProduct(v.conjugate());
  return c;
}

// *=== covariance and rates ===*

inline CMatrix interference_covariance(const Scenario& sc, std::size_t l, const CMatrix& h_eff,
                                       const PrecoderSet& precoders, const Selection& selection) {
  const auto n = static_cast<Eigen::Index>(sc.antennas());
  CMatrix r = sc.params.noise_power * CMatrix::Identity(n, n);
  for (std::size_t j = 0; j < sc.surviving(); ++j) {
    if (j == l || !selection.contains(j)) continue;
    const CVector x = h_eff * precoders[j];
    r.noalias() += x * x.adjoint();
  }
  return r;
}

inline CMatrix interference_covariance(const Scenario& sc, std::size_t l, const PhaseConfig& phase,
                                       const PrecoderSet& precoders, const Selection& selection) {
  return interference_covariance(sc, l, effective_channel(sc, l, phase), precoders, selection);
}

/// Post-MMSE SINR w_l^H H^H R_l^{-1} H w_l given the effective channel.
inline double mmse_sinr(const Scenario& sc, std::size_t l, const CMatrix& h_eff, const PrecoderSet& precoders,
                        const Selection& selection) {
  if (precoders[l].squaredNorm() == 0.0) return 0.0;
  const CVector signal = h_eff * precoders[l];
  const CMatrix r = interference_covariance(sc, l, h_eff, precoders, selection);
  const CVector x = hermitian_solve(r, signal);
  return std::max(0.0, signal.dot(x).real());
}

inline double achievable_rate(const Scenario& sc, std::size_t l, const PhaseConfig& phase, const PrecoderSet& precoders,
                              const Selection& selection) {
  const double sinr = mmse_sinr(sc, l, effective_channel(sc, l, phase), precoders, selection);
  return sc.params.bandwidth * std::log2(1.0 + sinr);
}

struct Redistribution {
  double total = 0.0;            ///< R
  std::vector<double> rate;      ///< r_l, zero for unselected BSs
  std::vector<double> credited;  ///< f_l
};

/// Evaluates the capped objective on precomputed effective channels.
inline Redistribution total_redistributed(const Scenario& sc, const std::vector<CMatrix>& h_eff,
                                          const PrecoderSet& precoders, const Selection& selection) {
  Redistribution out;
  out.rate.assign(sc.surviving(), 0.0);
  out.credited.assign(sc.surviving(), 0.0);
  for (std::size_t l = 0; l < sc.surviving(); ++l) {
    if (!selection.contains(l)) continue;
    const double r = sc.params.bandwidth * std::log2(1.0 + mmse_sinr(sc, l, h_eff[l], precoders, selection));
    out.rate[l] = r;
    out.credited[l] = std::min(r, sc.traffic.spare[l]);
    out.total += out.credited[l];
  }
  return out;
}

inline Redistribution total_redistributed(const Scenario& sc, const PhaseConfig& phase, const PrecoderSet& precoders,
                                          const Selection& selection) {
  return total_redistributed(sc, effective_channels(sc, phase), precoders, selection);
}

/// psi = min(1, R / C_d); nothing to recover counts as full survival.
inline double survivability(double redistributed, double demand) {
  if (redistributed < 0.0 || demand < 0.0) throw InvalidInput("survivability: negative traffic");
  if (demand == 0.0) return 1.0;
  return std::min(1.0, redistributed / demand);
}

// *=== quadratic-transform surrogate ===*

/// q_l = 2 Re{y^H H_eff,l w_l} - y^H R_l y.
inline double surrogate_value(const Scenario& sc, std::size_t l, const CVector& y, const PhaseConfig& phase,
                              const PrecoderSet& precoders, const Selection& selection) {
  const CMatrix h = effective_channel(sc, l, phase);
  const CMatrix r = interference_covariance(sc, l, h, precoders, selection);
  return 2.0 * y.dot(h * precoders[l]).real() - y.dot(r * y).real();
}

/**
 * Gradients of the real-valued q_l in the real parameterization, packed as d/dRe + i d/dIm
 * (equivalently twice the conjugate Wirtinger derivative).
 */
struct SurrogateGradient {
  std::vector<CVector> precoders;  ///< one entry per surviving BS; zero for BSs outside the sum
  CVector phase;
};

inline SurrogateGradient surrogate_gradients(const Scenario& sc, std::size_t l, const CVector& y,
                                             const PhaseConfig& phase, const PrecoderSet& precoders,
                                             const Selection& selection) {
  const CMatrix h = effective_channel(sc, l, phase);
  const CVector g = h.adjoint() * y;  // q_l = 2 Re{g^H w_l} - sigma^2 |y|^2 - sum_j |g^H w_j|^2
  SurrogateGradient grad;
  grad.precoders.assign(sc.surviving(), CVector::Zero(static_cast<Eigen::Index>(sc.antennas())));
  grad.precoders[l] = 2.0 * g;
  for (std::size_t j = 0; j < sc.surviving(); ++j) {
    if (j == l || !selection.contains(j)) continue;
    grad.precoders[j] = -2.0 * g * g.dot(precoders[j]);
  }

  grad.phase = CVector::Zero(static_cast<Eigen::Index>(sc.ris_elements()));
  if (sc.ris_elements() == 0) return grad;
  // signal: 2 Re{a + b^H phi} -> 2 b; interference: -|a + b^H phi|^2 -> -2 (a + b^H phi) b
  const Cascade own = cascade_coefficients(sc, l, y, precoders[l]);
  grad.phase += 2.0 * own.b;
  for (std::size_t j = 0; j < sc.surviving(); ++j) {
    if (j == l || !selection.contains(j)) continue;
    const Cascade c = cascade_coefficients(sc, l, y, precoders[j]);
    const Complex z = c.a + c.b.dot(phase.phi);
    grad.phase -= 2.0 * z * c.b;
  }
  return grad;
}

}  // namespace risbr
