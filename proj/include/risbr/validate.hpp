// Fast self-checks run by `risbr validate`: surrogate tightness, gradient vs finite
// differences, cascade identity and a tiny exhaustive-grid comparison.
#pragma once

#include "risbr/harness.hpp"
#include "risbr/model.hpp"
#include "risbr/optimizer.hpp"
#include "risbr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace risbr {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  double worst = 0.0;      ///< worst observed error (or lowest ratio for the oracle)
  double tolerance = 0.0;
  std::size_t samples = 0;
};

/// Random precoders with total power P_max spread over the selection.
inline PrecoderSet random_precoders(const Scenario& sc, const Selection& sel, Rng& rng) {
  PrecoderSet w = PrecoderSet::zeros(sc.surviving(), sc.antennas());
  for (auto l : sel.members())
    for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l](i) = rng.complex_normal();
  const double p = w.total_power();
  if (p > 0.0)
    for (auto& v : w.w) v *= std::sqrt(sc.params.max_power / p);
  return w;
}

/// A random selection of min(N, L) members.
inline Selection random_selection(const Scenario& sc, Rng& rng) {
  std::vector<std::size_t> idx(sc.surviving());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  idx.resize(std::min(sc.antennas(), sc.surviving()));
  return Selection(sc.surviving(), idx);
}

/**
 * Single-antenna, two-BS, two-element instance with unit bandwidth and noise. Direct and RIS paths
 * have comparable strength and the spare capacities sit in the range of the achievable rates, so
 * the caps bind on some instances and not on others.
 */
inline Scenario tiny_instance(Rng& rng) {
  SystemParams p;
  p.antennas = 1;
  p.ris_elements = 2;
  p.surviving_bs = 2;
  p.max_power = 1.0;
  p.bandwidth = 1.0;
  p.noise_power = 1.0;
  p.bbu_capacity = 4.0;
  ChannelSet ch;
  ch.to_ris = sample_cn(rng, 2, 1);
  for (int l = 0; l < 2; ++l) {
    ch.direct.push_back(0.7 * sample_cn(rng, 1, 1));
    ch.from_ris.push_back(sample_cn(rng, 1, 2));
  }
  std::vector<double> local{3.5 * rng.uniform(), 3.5 * rng.uniform()};
  return make_scenario(p, std::move(ch), 3.0, local);
}

namespace detail {

inline Scenario validation_scenario(const ExperimentSpec& spec, std::uint64_t seed) {
  return build_scenario(spec.scenario, seed);
}

/// q_l with y held fixed, for finite differencing.
inline double q_fixed(const Scenario& sc, std::size_t l, const CVector& y, const PhaseConfig& phase,
                      const PrecoderSet& w, const Selection& sel) {
  return surrogate_value(sc, l, y, phase, w, sel);
}

}  // namespace detail

inline CheckOutcome check_tightness(const ExperimentSpec& spec, std::uint64_t seed, std::size_t draws) {
  CheckOutcome out{"surrogate tightness", true, 0.0, 1e-9, 0};
  Rng rng(seed);
  for (std::size_t d = 0; d < draws; ++d) {
    const Scenario sc = detail::validation_scenario(spec, rng.next_u64());
    const Selection sel = random_selection(sc, rng);
    const PrecoderSet w = random_precoders(sc, sel, rng);
    const PhaseConfig phase = PhaseConfig::random(sc.ris_elements(), rng);
    const auto h = effective_channels(sc, phase);
    const AuxiliarySet aux = update_auxiliary(sc, h, w, sel, 0.0);
    for (auto l : sel.members()) {
      const double sinr = mmse_sinr(sc, l, h[l], w, sel);
      const double q = surrogate_value(sc, l, aux.y[l], phase, w, sel);
      out.worst = std::max(out.worst, std::abs(q - sinr) / std::max(sinr, 1e-300));
      ++out.samples;
    }
  }
  out.passed = out.worst <= out.tolerance;
  return out;
}

/**
 * Central differences on up to `coords` real coordinates of w and of phi. q_l is quadratic in
 * each block with y fixed, so the differences are exact up to rounding.
 */
inline CheckOutcome check_gradients(const ExperimentSpec& spec, std::uint64_t seed, std::size_t draws,
                                    std::size_t coords = 16) {
  CheckOutcome out{"surrogate gradients", true, 0.0, 1e-5, 0};
  Rng rng(seed);
  for (std::size_t d = 0; d < draws; ++d) {
    const Scenario sc = detail::validation_scenario(spec, rng.next_u64());
    const Selection sel = random_selection(sc, rng);
    const PrecoderSet w = random_precoders(sc, sel, rng);
    const PhaseConfig phase = PhaseConfig::random(sc.ris_elements(), rng);
    const AuxiliarySet aux = update_auxiliary(sc, phase, w, sel, spec.solver.eps_for(sc.antennas()));
    const auto members = sel.members();
    const std::size_t l = members[rng.next_u64() % members.size()];
    const auto grad = surrogate_gradients(sc, l, aux.y[l], phase, w, sel);

    std::vector<double> analytic, numeric;
    const double hw = 1e-4 * std::sqrt(sc.params.max_power);
    for (std::size_t c = 0; c < coords; ++c) {
      const std::size_t j = members[rng.next_u64() % members.size()];
      const auto i = static_cast<Eigen::Index>(rng.next_u64() % sc.antennas());
      for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        PrecoderSet plus = w, minus = w;
        plus[j](i) += hw * dir;
        minus[j](i) -= hw * dir;
        numeric.push_back((detail::q_fixed(sc, l, aux.y[l], phase, plus, sel) -
                           detail::q_fixed(sc, l, aux.y[l], phase, minus, sel)) / (2.0 * hw));
        analytic.push_back(dir.real() != 0.0 ? grad.precoders[j](i).real() : grad.precoders[j](i).imag());
      }
    }
    if (sc.ris_elements() > 0) {
      const double hp = 1e-4;
      for (std::size_t c = 0; c < coords; ++c) {
        const auto m = static_cast<Eigen::Index>(rng.next_u64() % sc.ris_elements());
        for (const Complex dir : {Complex(1, 0), Complex(0, 1)}) {
          PhaseConfig plus = phase, minus = phase;
          plus.phi(m) += hp * dir;
          minus.phi(m) -= hp * dir;
          numeric.push_back((detail::q_fixed(sc, l, aux.y[l], plus, w, sel) -
                             detail::q_fixed(sc, l, aux.y[l], minus, w, sel)) / (2.0 * hp));
          analytic.push_back(dir.real() != 0.0 ? grad.phase(m).real() : grad.phase(m).imag());
        }
      }
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
      norm += analytic[k] * analytic[k];
    }
    out.worst = std::max(out.worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-300));
    ++out.samples;
  }
  out.passed = out.worst <= out.tolerance;
  return out;
}

inline CheckOutcome check_cascade(const ExperimentSpec& spec, std::uint64_t seed, std::size_t draws) {
  CheckOutcome out{"cascade identity", true, 0.0, 1e-12, 0};
  Rng rng(seed);
  const Scenario sc = detail::validation_scenario(spec, rng.next_u64());
  const auto n = static_cast<Eigen::Index>(sc.antennas());
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t l = rng.next_u64() % sc.surviving();
    const CVector y = sample_cn(rng, n, 1);
    const CVector w = sample_cn(rng, n, 1);
    const PhaseConfig phase = PhaseConfig::random(sc.ris_elements(), rng);
    const Cascade c = cascade_coefficients(sc, l, y, w);
    const Complex direct = y.dot(effective_channel(sc, l, phase) * w);
    const Complex via = c.a + (sc.ris_elements() > 0 ? c.b.dot(phase.phi) : Complex(0.0));
    double gain = sc.channels.direct[l].norm();
    if (sc.ris_elements() > 0) gain += sc.channels.from_ris[l].norm() * sc.channels.to_ris.norm();
    const double scale = y.norm() * gain * w.norm();
    out.worst = std::max(out.worst, std::abs(via - direct) / scale);
    ++out.samples;
  }
  out.passed = out.worst <= out.tolerance;
  return out;
}

/// Best capped objective of a tiny instance over a phase grid, power grid and all selections.
inline double tiny_grid_optimum(const Scenario& sc, std::size_t phase_points, std::size_t power_points) {
  double best = 0.0;
  const double step = 2.0 * std::numbers::pi / static_cast<double>(phase_points);
  for (const auto& sel : enumerate_selections(sc.surviving(), sc.antennas())) {
    const auto members = sel.members();
    for (std::size_t a = 0; a < phase_points; ++a)
      for (std::size_t b = 0; b < phase_points; ++b) {
        PhaseConfig phase{CVector(2)};
        phase.phi(0) = std::polar(1.0, step * static_cast<double>(a));
        phase.phi(1) = std::polar(1.0, step * static_cast<double>(b));
        const auto h = effective_channels(sc, phase);
        for (std::size_t k = 1; k <= power_points; ++k) {
          const double frac = static_cast<double>(k) / static_cast<double>(power_points);
          PrecoderSet w = PrecoderSet::zeros(sc.surviving(), 1);
          if (members.size() == 1) {
            w[members[0]](0) = std::sqrt(frac * sc.params.max_power);
          } else {
            w[members[0]](0) = std::sqrt(frac * sc.params.max_power);
            w[members[1]](0) = std::sqrt((1.0 - frac) * sc.params.max_power);
          }
          best = std::max(best, total_redistributed(sc, h, w, sel).total);
        }
      }
  }
  return best;
}

inline CheckOutcome check_tiny_oracle(const ExperimentSpec& spec, std::uint64_t seed, std::size_t instances,
                                      std::size_t phase_points = 72) {
  CheckOutcome out{"tiny-instance oracle", true, 1.0, 0.98, 0};
  Rng rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    const Scenario sc = tiny_instance(rng);
    Rng solver_rng(rng.next_u64());
    const SolveResult res = run_algorithm(sc, spec.solver, solver_rng);
    const double oracle = tiny_grid_optimum(sc, phase_points, 20);
    const double ratio = oracle > 0.0 ? res.total / oracle : 1.0;
    out.worst = std::min(out.worst, ratio);
    ++out.samples;
  }
  out.passed = out.worst >= out.tolerance;
  return out;
}

/// The suite run by `risbr validate`.
inline std::vector<CheckOutcome> run_validation(const ExperimentSpec& spec, std::uint64_t seed) {
  return {check_tightness(spec, derive_seed(seed, 101), 10), check_gradients(spec, derive_seed(seed, 102), 10),
          check_cascade(spec, derive_seed(seed, 103), 100), check_tiny_oracle(spec, derive_seed(seed, 104), 5)};
}

}  // namespace risbr
