// Alternating quadratic-transform optimizer for receiving-BS selection, precoders and RIS
// phases.
//
// For a fixed selection S the optimizer alternates two concave subproblems:
//
//   precoder step   max_w   sum_{l in S} min(B log2(1 + q_l(w; y_phi)), C_0 - C_l)
//                   s.t.    sum_l |w_l|^2 <= P_max,  w_l = 0 for l outside S
//   phase step      max_phi sum_{l in S} min(B log2(1 + q_l(phi; y_w)), C_0 - C_l)
//                   s.t.    |phi_m| <= 1
//
// followed by phase normalization phi_m <- phi_m / |phi_m|. The auxiliaries y are refreshed after
// every step as y_l = R_l^{-1} H_eff,l w_l + eps 1. The min with the spare capacity is the
// epigraph/big-M construction collapsed for a fixed selection: at an optimum f_l = min(r_l, spare_l)
// so maximizing sum f_l is maximizing the capped sum.
//
// The binary selection is handled by exhaustive enumeration of all subsets with |S| <= N
// (OuterEnumeration), by a greedy growth over the same per-subset solves (Greedy), or by
// re-picking the subset at every precoder step (PerIterationEnumeration).
//
// Each subproblem is solved by projected gradient ascent with backtracking. Both share one
// representation: with z = offset + basis^H x,
//
//   q_l(x) = 2 Re z_ll - noise_l - sum_{j != l} |z_lj|^2
//
// where for the precoder step z_lj = (H_eff,l^H y_l)^H w_j and for the phase step z_lj = a_lj +
// b_lj^H phi are the cascade coefficients.
#pragma once

#include "risbr/model.hpp"
#include "risbr/numerics.hpp"
#include "risbr/parallel.hpp"
#include "risbr/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace risbr {

enum class SelectionStrategy { OuterEnumeration, PerIterationEnumeration, Greedy };

inline std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::OuterEnumeration: return "outer";
    case SelectionStrategy::PerIterationEnumeration: return "per-iter";
    case SelectionStrategy::Greedy: return "greedy";
  }
  return "outer";
}

inline SelectionStrategy parse_strategy(const std::string& name) {
  if (name == "outer") return SelectionStrategy::OuterEnumeration;
  if (name == "per-iter") return SelectionStrategy::PerIterationEnumeration;
  if (name == "greedy") return SelectionStrategy::Greedy;
  throw InvalidInput("unknown selection strategy '" + name + "' (expected outer|per-iter|greedy)");
}

struct InnerSolverSettings {
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-6;  ///< stop when a step moves less than this fraction of the set radius
  double backtrack_factor = 0.5;
};

struct SolverConfig {
  std::size_t max_outer_iterations = 50;  ///< E
  /// Stop when the relative change of the true objective drops below this. +inf disables the
  /// test so exactly E iterations run.
  double outer_tolerance = 1e-4;
  InnerSolverSettings inner;
  SelectionStrategy strategy = SelectionStrategy::OuterEnumeration;
  std::optional<double> regularization;  ///< eps; defaults to 1e-6 / sqrt(N)
  std::size_t threads = 1;               ///< workers for the per-subset solves

  double eps_for(std::size_t antennas) const {
    return regularization ? *regularization : 1e-6 / std::sqrt(static_cast<double>(antennas));
  }

  void validate() const {
    if (max_outer_iterations < 1) throw InvalidInput("solver: max outer iterations must be >= 1");
    if (!(outer_tolerance > 0.0)) throw InvalidInput("solver: outer tolerance must be > 0");
    if (inner.max_iterations < 1) throw InvalidInput("solver: inner iterations must be >= 1");
    if (!(inner.gradient_tolerance > 0.0)) throw InvalidInput("solver: gradient tolerance must be > 0");
    if (!(inner.backtrack_factor > 0.0 && inner.backtrack_factor < 1.0))
      throw InvalidInput("solver: backtrack factor must lie in (0, 1)");
    if (regularization && !(*regularization >= 0.0)) throw InvalidInput("solver: eps_reg must be >= 0");
  }
};

struct SolveResult {
  SelectionStrategy strategy = SelectionStrategy::OuterEnumeration;
  Selection selection;
  PhaseConfig phase;
  PrecoderSet precoders;
  double total = 0.0;          ///< R [bit/s]
  double survivability = 0.0;  ///< psi
  std::vector<double> rates;     ///< r_l
  std::vector<double> credited;  ///< f_l

  std::vector<double> objective_trace;        ///< true R after each outer iteration
  std::vector<double> phase_change_trace;     ///< |phi(e) - phi(e-1)|, 0 at e = 0
  std::vector<double> precoder_change_trace;  ///< sum_l |w_l(e) - w_l(e-1)|, 0 at e = 0
  std::size_t iterations = 0;
  bool converged = false;  ///< outer tolerance reached before E

  std::size_t selections_evaluated = 0;
  std::size_t subproblems = 0;
  std::size_t subproblems_unconverged = 0;
  double wall_seconds = 0.0;
};

// *=== selection enumeration ===*

/// All nonempty subsets of {0..L-1} with at most N members, ordered by size then lexicographically.
inline std::vector<Selection> enumerate_selections(std::size_t bs_count, std::size_t antennas) {
  if (bs_count < 1 || antennas < 1) throw InvalidInput("enumerate_selections: L and N must be >= 1");
  std::vector<Selection> out;
  const std::size_t max_size = std::min(bs_count, antennas);
  for (std::size_t k = 1; k <= max_size; ++k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
      out.emplace_back(bs_count, idx);
      // next combination in lexicographic order
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == bs_count - k + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

// *=== auxiliaries ===*

inline AuxiliarySet update_auxiliary(const Scenario& sc, const std::vector<CMatrix>& h_eff, const PrecoderSet& precoders,
                                     const Selection& selection, double eps) {
  const auto n = static_cast<Eigen::Index>(sc.antennas());
  AuxiliarySet aux;
  aux.y.reserve(sc.surviving());
  for (std::size_t l = 0; l < sc.surviving(); ++l) {
    const CVector signal = h_eff[l] * precoders[l];
    const CMatrix r = interference_covariance(sc, l, h_eff[l], precoders, selection);
    CVector y = hermitian_solve(r, signal);
    y.array() += eps;
    aux.t.push_back(2.0 * y.dot(signal).real() - y.dot(r * y).real());
    aux.y.push_back(std::move(y));
  }
  (void)n;
  const Redistribution red = total_redistributed(sc, h_eff, precoders, selection);
  aux.rate = red.rate;
  aux.credited = red.credited;
  aux.total = red.total;
  return aux;
}

inline AuxiliarySet update_auxiliary(const Scenario& sc, const PhaseConfig& phase, const PrecoderSet& precoders,
                                     const Selection& selection, double eps) {
  return update_auxiliary(sc, effective_channels(sc, phase), precoders, selection, eps);
}

namespace detail {

/// Smooth concave extension of log2(1 + q): exact for q >= -1/2, tangent line below.
inline double log_rate(double q) {
  constexpr double knee = -0.5;
  if (q >= knee) return std::log2(1.0 + q);
  return std::log2(1.0 + knee) + (q - knee) / ((1.0 + knee) * std::numbers::ln2);
}

inline double log_rate_slope(double q) {
  constexpr double knee = -0.5;
  return 1.0 / ((1.0 + std::max(q, knee)) * std::numbers::ln2);
}

/// Capped-rate objective over z = offset + basis^H x; column l * users + j holds the (l, j) pair.
struct CappedSurrogate {
  std::size_t users = 0;
  CMatrix basis;
  CVector offset;
  std::vector<double> noise;
  std::vector<double> spare;
  double bandwidth = 1.0;

  CVector pairs(const CVector& x) const { return offset + basis.adjoint() * x; }

  std::vector<double> surrogates(const CVector& z) const {
    std::vector<double> q(users);
    for (std::size_t l = 0; l < users; ++l) {
      double v = 2.0 * z(static_cast<Eigen::Index>(l * users + l)).real() - noise[l];
      for (std::size_t j = 0; j < users; ++j)
        if (j != l) v -= std::norm(z(static_cast<Eigen::Index>(l * users + j)));
      q[l] = v;
    }
    return q;
  }

  double objective_from(const std::vector<double>& q) const {
    double f = 0.0;
    for (std::size_t l = 0; l < users; ++l) f += std::min(bandwidth * log_rate(q[l]), spare[l]);
    return f;
  }

  double objective(const CVector& x) const { return objective_from(surrogates(pairs(x))); }

  /// Per-BS ascent weight: the rate slope while the rate branch is active (r <= spare), else 0.
  std::vector<double> weights(const std::vector<double>& q) const {
    std::vector<double> c(users, 0.0);
    for (std::size_t l = 0; l < users; ++l)
      if (bandwidth * log_rate(q[l]) <= spare[l]) c[l] = bandwidth * log_rate_slope(q[l]);
    return c;
  }

  CVector gradient(const CVector& z, const std::vector<double>& c) const {
    CVector coef = CVector::Zero(static_cast<Eigen::Index>(users * users));
    for (std::size_t l = 0; l < users; ++l) {
      if (c[l] == 0.0) continue;
      for (std::size_t j = 0; j < users; ++j) {
        const auto k = static_cast<Eigen::Index>(l * users + j);
        coef(k) = j == l ? Complex(2.0 * c[l], 0.0) : -2.0 * c[l] * z(k);
      }
    }
    return basis * coef;
  }

  /// Largest eigenvalue of the weighted interference Hessian 2 sum_l c_l sum_{j != l} b_lj b_lj^H,
  /// computed through the small Gram matrix.
  double curvature(const std::vector<double>& c) const {
    const auto k = static_cast<Eigen::Index>(users * users);
    Eigen::VectorXd root(k);
    for (std::size_t l = 0; l < users; ++l)
      for (std::size_t j = 0; j < users; ++j)
        root(static_cast<Eigen::Index>(l * users + j)) = j == l ? 0.0 : std::sqrt(2.0 * c[l]);
    if (root.maxCoeff() == 0.0) return 0.0;
    const CMatrix gram = root.asDiagonal() * (basis.adjoint() * basis) * root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues().maxCoeff());
  }
};

struct AscentResult {
  CVector x;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;  ///< objective after each accepted step, starting at the initial point
};

/**
 * Projected gradient ascent with backtracking. The initial step is the inverse curvature of the
 * quadratic interference term (capped by `diameter` / |grad|); steps are halved (by the backtrack
 * factor) until the objective strictly increases and doubled after each accepted step.
 */
template <typename Project>
AscentResult projected_ascent(const CappedSurrogate& problem, const CVector& start, Project&& project, double diameter,
                              const InnerSolverSettings& settings) {
  AscentResult res;
  res.x = project(start);
  CVector z = problem.pairs(res.x);
  std::vector<double> q = problem.surrogates(z);
  res.objective = problem.objective_from(q);
  res.initial_objective = res.objective;
  res.history.push_back(res.objective);

  std::vector<double> c = problem.weights(q);
  CVector grad = problem.gradient(z, c);
  const double g0 = grad.norm();
  if (g0 == 0.0 || !std::isfinite(g0)) {
    res.converged = true;
    return res;
  }
  const double lip = problem.curvature(c);
  const double step_cap = 1e3 * diameter / g0;
  double step = lip > 0.0 ? std::min(1.0 / lip, step_cap) : step_cap;
  const double move_tol = settings.gradient_tolerance * diameter;

  for (std::size_t it = 0; it < settings.max_iterations; ++it) {
    res.iterations = it + 1;
    const double gnorm = grad.norm();
    if (gnorm == 0.0) {
      res.converged = true;
      break;
    }
    double trial = std::min(step * 2.0, 1e3 * diameter / gnorm);
    bool accepted = false;
    CVector x_new;
    CVector z_new;
    std::vector<double> q_new;
    double f_new = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      x_new = project(res.x + trial * grad);
      z_new = problem.pairs(x_new);
      q_new = problem.surrogates(z_new);
      f_new = problem.objective_from(q_new);
      if (f_new > res.objective) {
        accepted = true;
        break;
      }
      trial *= settings.backtrack_factor;
      if ((x_new - res.x).norm() < 1e-3 * move_tol) break;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    const double moved = (x_new - res.x).norm();
    const double gain = f_new - res.objective;
    res.x = std::move(x_new);
    z = std::move(z_new);
    q = std::move(q_new);
    res.objective = f_new;
    res.history.push_back(f_new);
    step = trial;
    if (moved <= move_tol || gain <= 1e-13 * std::abs(f_new)) {
      res.converged = true;
      break;
    }
    c = problem.weights(q);
    grad = problem.gradient(z, c);
  }
  return res;
}

inline CappedSurrogate precoder_surrogate(const Scenario& sc, const std::vector<CMatrix>& h_eff,
                                          const std::vector<CVector>& y, const std::vector<std::size_t>& members) {
  const std::size_t s = members.size();
  const auto n = static_cast<Eigen::Index>(sc.antennas());
  CappedSurrogate p;
  p.users = s;
  p.bandwidth = sc.params.bandwidth;
  p.basis = CMatrix::Zero(n * static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s * s));
  p.offset = CVector::Zero(static_cast<Eigen::Index>(s * s));
  for (std::size_t li = 0; li < s; ++li) {
    const std::size_t l = members[li];
    const CVector g = h_eff[l].adjoint() * y[l];
    for (std::size_t ji = 0; ji < s; ++ji)
      p.basis.block(static_cast<Eigen::Index>(ji) * n, static_cast<Eigen::Index>(li * s + ji), n, 1) = g;
    p.noise.push_back(sc.params.noise_power * y[l].squaredNorm());
    p.spare.push_back(sc.traffic.spare[l]);
  }
  return p;
}

inline CappedSurrogate phase_surrogate(const Scenario& sc, const PrecoderSet& precoders, const std::vector<CVector>& y,
                                       const std::vector<std::size_t>& members) {
  const std::size_t s = members.size();
  const auto m = static_cast<Eigen::Index>(sc.ris_elements());
  const auto& ch = sc.channels;
  CappedSurrogate p;
  p.users = s;
  p.bandwidth = sc.params.bandwidth;
  p.basis = CMatrix(m, static_cast<Eigen::Index>(s * s));
  p.offset = CVector(static_cast<Eigen::Index>(s * s));
  std::vector<CVector> v(s);
  for (std::size_t ji = 0; ji < s; ++ji) v[ji] = (ch.to_ris * precoders[members[ji]]).conjugate();
  for (std::size_t li = 0; li < s; ++li) {
    const std::size_t l = members[li];
    const CVector u = ch.from_ris[l].adjoint() * y[l];
    const CVector yh = ch.direct[l].adjoint() * y[l];
    for (std::size_t ji = 0; ji < s; ++ji) {
      const auto k = static_cast<Eigen::Index>(li * s + ji);
      p.basis.col(k) = u.cwiseProduct(v[ji]);
      p.offset(k) = yh.dot(precoders[members[ji]]);
    }
    p.noise.push_back(sc.params.noise_power * y[l].squaredNorm());
    p.spare.push_back(sc.traffic.spare[l]);
  }
  return p;
}

inline CVector stack(const PrecoderSet& w, const std::vector<std::size_t>& members, Eigen::Index n) {
  CVector x(n * static_cast<Eigen::Index>(members.size()));
  for (std::size_t i = 0; i < members.size(); ++i) x.segment(static_cast<Eigen::Index>(i) * n, n) = w[members[i]];
  return x;
}

inline PrecoderSet unstack(const CVector& x, const std::vector<std::size_t>& members, std::size_t bs_count,
                           Eigen::Index n) {
  PrecoderSet w = PrecoderSet::zeros(bs_count, static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < members.size(); ++i) w[members[i]] = x.segment(static_cast<Eigen::Index>(i) * n, n);
  return w;
}

/// Unit-modulus normalization; vanishing entries are reset to 1.
inline CVector normalize_phases(const CVector& phi) {
  CVector out(phi.size());
  for (Eigen::Index m = 0; m < phi.size(); ++m) {
    const double mag = std::abs(phi(m));
    out(m) = mag < 1e-12 ? Complex(1.0, 0.0) : phi(m) / mag;
  }
  return out;
}

}  // namespace detail

// *=== precoder step ===*

struct PrecoderSolve {
  PrecoderSet precoders;
  double objective = 0.0;          ///< capped surrogate objective at the returned point
  double initial_objective = 0.0;  ///< at the (feasibility-scaled) warm start
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

inline PrecoderSolve solve_precoder_subproblem(const Scenario& sc, const std::vector<CMatrix>& h_eff,
                                               const std::vector<CVector>& y_phase, const Selection& selection,
                                               const PrecoderSet& warm, const SolverConfig& config) {
  const auto members = selection.members();
  if (members.empty()) throw InvalidInput("solve_precoder_subproblem: empty selection");
  const auto n = static_cast<Eigen::Index>(sc.antennas());
  const auto problem = detail::precoder_surrogate(sc, h_eff, y_phase, members);
  const double radius = std::sqrt(sc.params.max_power);
  auto project = [radius](const CVector& x) { return project_ball(x, radius); };
  const auto res = detail::projected_ascent(problem, detail::stack(warm, members, n), project, 2.0 * radius, config.inner);
  PrecoderSolve out;
  out.precoders = detail::unstack(res.x, members, sc.surviving(), n);
  out.objective = res.objective;
  out.initial_objective = res.initial_objective;
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.history = res.history;
  return out;
}

inline PrecoderSolve solve_precoder_subproblem(const Scenario& sc, const PhaseConfig& phase,
                                               const std::vector<CVector>& y_phase, const Selection& selection,
                                               const PrecoderSet& warm, const SolverConfig& config) {
  return solve_precoder_subproblem(sc, effective_channels(sc, phase), y_phase, selection, warm, config);
}

// *=== phase step ===*

struct PhaseSolve {
  PhaseConfig phase;    ///< normalized to unit modulus
  PhaseConfig relaxed;  ///< maximizer over |phi_m| <= 1 before normalization
  double relaxed_objective = 0.0;
  double normalized_objective = 0.0;
  double initial_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

inline PhaseSolve solve_phase_subproblem(const Scenario& sc, const PrecoderSet& precoders,
                                         const std::vector<CVector>& y_precoder, const Selection& selection,
                                         const PhaseConfig& warm, const SolverConfig& config) {
  PhaseSolve out;
  if (sc.ris_elements() == 0) {
    out.phase = out.relaxed = warm;
    out.converged = true;
    return out;
  }
  const auto members = selection.members();
  if (members.empty()) throw InvalidInput("solve_phase_subproblem: empty selection");
  const auto problem = detail::phase_surrogate(sc, precoders, y_precoder, members);
  const double diameter = 2.0 * std::sqrt(static_cast<double>(sc.ris_elements()));
  auto project = [](const CVector& x) { return project_unit_disk(x); };
  const auto res = detail::projected_ascent(problem, warm.phi, project, diameter, config.inner);
  out.relaxed = PhaseConfig{res.x};
  out.relaxed_objective = res.objective;
  out.initial_objective = res.initial_objective;
  out.phase = PhaseConfig{detail::normalize_phases(res.x)};
  out.normalized_objective = problem.objective(out.phase.phi);
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.history = res.history;
  return out;
}

// *=== alternating loop ===*

namespace detail {

/// Principal right singular vector of each effective channel.
inline std::vector<CVector> matched_directions(const std::vector<CMatrix>& h_eff) {
  std::vector<CVector> out;
  out.reserve(h_eff.size());
  for (const auto& h : h_eff) out.push_back(principal_eigenvector(h.adjoint() * h));
  return out;
}

/// Equal power split over the selection along the given directions.
inline PrecoderSet matched_filter_start(const Scenario& sc, const std::vector<CVector>& directions,
                                        const Selection& selection) {
  PrecoderSet w = PrecoderSet::zeros(sc.surviving(), sc.antennas());
  const auto members = selection.members();
  const double amp = std::sqrt(sc.params.max_power / static_cast<double>(members.size()));
  for (auto l : members) w[l] = amp * directions[l];
  return w;
}

inline double precoder_change(const PrecoderSet& a, const PrecoderSet& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) d += (a[l] - b[l]).norm();
  return d;
}

inline bool outer_converged(double previous, double current, double tol) {
  if (!std::isfinite(tol)) return false;
  const double scale = std::max(std::abs(current), std::abs(previous));
  if (scale == 0.0) return true;
  return std::abs(current - previous) <= tol * scale;
}

inline SolveResult zero_result(const Scenario& sc, Selection selection, PhaseConfig phase) {
  SolveResult r;
  r.selection = std::move(selection);
  r.phase = std::move(phase);
  r.precoders = PrecoderSet::zeros(sc.surviving(), sc.antennas());
  r.rates.assign(sc.surviving(), 0.0);
  r.credited.assign(sc.surviving(), 0.0);
  r.total = 0.0;
  r.survivability = survivability(0.0, sc.traffic.demand);
  r.converged = true;
  return r;
}

struct Iterate {
  PhaseConfig phase;
  PrecoderSet precoders;
  Selection selection;
  Redistribution value;
};

inline void adopt(SolveResult& r, const Iterate& it, const Scenario& sc) {
  r.selection = it.selection;
  r.phase = it.phase;
  r.precoders = it.precoders;
  r.total = it.value.total;
  r.rates = it.value.rate;
  r.credited = it.value.credited;
  r.survivability = survivability(r.total, sc.traffic.demand);
}

inline bool all_spare_exhausted(const Scenario& sc, const Selection* only = nullptr) {
  for (std::size_t l = 0; l < sc.surviving(); ++l) {
    if (only && !only->contains(l)) continue;
    if (sc.traffic.spare[l] > 0.0) return false;
  }
  return true;
}

// A member with no spare capacity earns nothing and only interferes, so any subset holding one is
// dominated by the same subset without it. Indices refer to enumerate_selections(L, N).
inline std::vector<std::size_t> useful_subsets(const Scenario& sc, const std::vector<Selection>& subsets) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    bool useful = true;
    for (auto l : subsets[k].members()) useful = useful && sc.traffic.spare[l] > 0.0;
    if (useful) out.push_back(k);
  }
  return out;
}

}  // namespace detail

/**
 * Alternating optimization for one fixed selection. The phase vector starts at random unit-modulus
 * values and the precoders at equal-power matched filters. The iterate with the best true objective
 * (exact MMSE rates, capped) is returned.
 */
inline SolveResult solve_fixed_selection(const Scenario& sc, const Selection& selection, const SolverConfig& config,
                                         Rng& rng) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (selection.bs_count() != sc.surviving()) throw InvalidInput("solve_fixed_selection: selection size != L");
  if (selection.empty() || selection.count() > sc.antennas())
    throw InvalidInput("solve_fixed_selection: selection must have 1..N members");

  PhaseConfig phase = PhaseConfig::random(sc.ris_elements(), rng);
  if (detail::all_spare_exhausted(sc, &selection)) {
    auto r = detail::zero_result(sc, selection, std::move(phase));
    r.selections_evaluated = 1;
    return r;
  }

  const double eps = config.eps_for(sc.antennas());
  std::vector<CMatrix> h = effective_channels(sc, phase);
  PrecoderSet w = detail::matched_filter_start(sc, detail::matched_directions(h), selection);
  AuxiliarySet y_phase = update_auxiliary(sc, h, w, selection, eps);

  SolveResult result;
  result.selections_evaluated = 1;
  detail::Iterate best{phase, w, selection, {y_phase.total, y_phase.rate, y_phase.credited}};
  double previous = y_phase.total;

  for (std::size_t it = 0; it < config.max_outer_iterations; ++it) {
    const PrecoderSolve p1 = solve_precoder_subproblem(sc, h, y_phase.y, selection, w, config);
    const AuxiliarySet y_precoder = update_auxiliary(sc, h, p1.precoders, selection, eps);
    const PhaseSolve p2 = solve_phase_subproblem(sc, p1.precoders, y_precoder.y, selection, phase, config);
    result.subproblems += 2;
    result.subproblems_unconverged += (p1.converged ? 0 : 1) + (p2.converged ? 0 : 1);

    h = effective_channels(sc, p2.phase);
    y_phase = update_auxiliary(sc, h, p1.precoders, selection, eps);

    result.objective_trace.push_back(y_phase.total);
    result.phase_change_trace.push_back(it == 0 ? 0.0 : (p2.phase.phi - phase.phi).norm());
    result.precoder_change_trace.push_back(it == 0 ? 0.0 : detail::precoder_change(p1.precoders, w));
    result.iterations = it + 1;

    phase = p2.phase;
    w = p1.precoders;
    if (y_phase.total > best.value.total) best = {phase, w, selection, {y_phase.total, y_phase.rate, y_phase.credited}};
    if (it > 0 && detail::outer_converged(previous, y_phase.total, config.outer_tolerance)) {
      result.converged = true;
      break;
    }
    previous = y_phase.total;
  }

  detail::adopt(result, best, sc);
  result.strategy = config.strategy;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace detail {

inline SolveResult per_iteration_enumeration(const Scenario& sc, const SolverConfig& config, Rng& rng) {
  std::vector<Selection> subsets;
  {
    const auto all = enumerate_selections(sc.surviving(), sc.antennas());
    for (auto k : useful_subsets(sc, all)) subsets.push_back(all[k]);
  }
  const double eps = config.eps_for(sc.antennas());
  PhaseConfig phase = PhaseConfig::random(sc.ris_elements(), rng);
  std::vector<CMatrix> h = effective_channels(sc, phase);

  SolveResult result;
  // initial subset: best true objective among equal-power matched-filter starts
  auto directions = matched_directions(h);
  std::size_t chosen = 0;
  double chosen_value = -1.0;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    const auto w0 = matched_filter_start(sc, directions, subsets[k]);
    const double v = total_redistributed(sc, h, w0, subsets[k]).total;
    if (v > chosen_value) {
      chosen_value = v;
      chosen = k;
    }
  }
  Selection selection = subsets[chosen];
  PrecoderSet w = matched_filter_start(sc, directions, selection);
  const auto initial = total_redistributed(sc, h, w, selection);
  Iterate best{phase, w, selection, initial};
  double previous = initial.total;

  for (std::size_t it = 0; it < config.max_outer_iterations; ++it) {
    // precoder step with the selection re-picked over all subsets
    PrecoderSet w_next;
    Selection s_next;
    double v_next = -1.0;
    for (const auto& cand : subsets) {
      PrecoderSet warm = PrecoderSet::zeros(sc.surviving(), sc.antennas());
      const double amp = std::sqrt(sc.params.max_power / static_cast<double>(cand.count()));
      for (auto l : cand.members()) warm[l] = w[l].squaredNorm() > 0.0 ? w[l] : CVector(amp * directions[l]);
      const double power = warm.total_power();
      if (power > sc.params.max_power)
        for (auto& v : warm.w) v *= std::sqrt(sc.params.max_power / power);
      const AuxiliarySet y = update_auxiliary(sc, h, warm, cand, eps);
      const PrecoderSolve p1 = solve_precoder_subproblem(sc, h, y.y, cand, warm, config);
      ++result.subproblems;
      result.subproblems_unconverged += p1.converged ? 0 : 1;
      const double v = total_redistributed(sc, h, p1.precoders, cand).total;
      if (v > v_next) {
        v_next = v;
        w_next = p1.precoders;
        s_next = cand;
      }
    }
    result.selections_evaluated += subsets.size();

    // with the precoders fixed the selection is pinned to their support
    const AuxiliarySet y_precoder = update_auxiliary(sc, h, w_next, s_next, eps);
    const PhaseSolve p2 = solve_phase_subproblem(sc, w_next, y_precoder.y, s_next, phase, config);
    ++result.subproblems;
    result.subproblems_unconverged += p2.converged ? 0 : 1;
    h = effective_channels(sc, p2.phase);
    directions = matched_directions(h);
    const auto value = total_redistributed(sc, h, w_next, s_next);

    result.objective_trace.push_back(value.total);
    result.phase_change_trace.push_back(it == 0 ? 0.0 : (p2.phase.phi - phase.phi).norm());
    result.precoder_change_trace.push_back(it == 0 ? 0.0 : precoder_change(w_next, w));
    result.iterations = it + 1;

    phase = p2.phase;
    w = w_next;
    selection = s_next;
    if (value.total > best.value.total) best = {phase, w, selection, value};
    if (it > 0 && outer_converged(previous, value.total, config.outer_tolerance)) {
      result.converged = true;
      break;
    }
    previous = value.total;
  }
  adopt(result, best, sc);
  return result;
}

}  // namespace detail

/**
 * Full selection + precoder + phase optimization.
 *
 * Per-subset solves are seeded from one draw of `rng` and the subset's canonical index, so the
 * Greedy strategy reuses exactly the solves OuterEnumeration would run and never beats it.
 */
inline SolveResult run_algorithm(const Scenario& sc, const SolverConfig& config, Rng& rng) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t base = rng.next_u64();

  SolveResult result;
  if (detail::all_spare_exhausted(sc)) {
    Rng phase_rng(derive_seed(base, 0));
    result = detail::zero_result(sc, Selection(sc.surviving()), PhaseConfig::random(sc.ris_elements(), phase_rng));
    result.strategy = config.strategy;
    return result;
  }

  const auto subsets = enumerate_selections(sc.surviving(), sc.antennas());
  auto solve_subset = [&](std::size_t k) {
    Rng sub_rng(derive_seed(base, k));
    SolverConfig inner = config;
    inner.threads = 1;
    return solve_fixed_selection(sc, subsets[k], inner, sub_rng);
  };
  auto better = [](const SolveResult& a, const SolveResult& b) { return a.total > b.total; };

  switch (config.strategy) {
    case SelectionStrategy::OuterEnumeration: {
      const auto useful = detail::useful_subsets(sc, subsets);
      std::vector<SolveResult> all(useful.size());
      parallel_for(useful.size(), config.threads, [&](std::size_t i) { all[i] = solve_subset(useful[i]); });
      std::size_t best = 0;
      for (std::size_t k = 1; k < all.size(); ++k)
        if (better(all[k], all[best])) best = k;
      std::size_t subproblems = 0, unconverged = 0;
      for (const auto& r : all) {
        subproblems += r.subproblems;
        unconverged += r.subproblems_unconverged;
      }
      result = std::move(all[best]);
      result.selections_evaluated = useful.size();
      result.subproblems = subproblems;
      result.subproblems_unconverged = unconverged;
      break;
    }
    case SelectionStrategy::Greedy: {
      std::map<std::vector<std::size_t>, std::size_t> index;
      for (std::size_t k = 0; k < subsets.size(); ++k) index[subsets[k].members()] = k;
      std::map<std::size_t, SolveResult> cache;
      auto evaluate = [&](std::size_t k) -> const SolveResult& {
        auto it = cache.find(k);
        if (it == cache.end()) it = cache.emplace(k, solve_subset(k)).first;
        return it->second;
      };
      std::vector<std::size_t> current;
      std::optional<SolveResult> incumbent;
      while (current.size() < std::min(sc.antennas(), sc.surviving())) {
        std::optional<std::size_t> pick;
        const SolveResult* pick_result = nullptr;
        for (std::size_t l = 0; l < sc.surviving(); ++l) {
          if (std::find(current.begin(), current.end(), l) != current.end()) continue;
          if (!(sc.traffic.spare[l] > 0.0)) continue;
          auto cand = current;
          cand.push_back(l);
          std::sort(cand.begin(), cand.end());
          const SolveResult& r = evaluate(index.at(cand));
          if (!pick_result || better(r, *pick_result)) {
            pick = l;
            pick_result = &r;
          }
        }
        if (!pick) break;
        if (incumbent && !(pick_result->total > incumbent->total)) break;
        incumbent = *pick_result;
        current.push_back(*pick);
        std::sort(current.begin(), current.end());
      }
      result = std::move(*incumbent);
      result.selections_evaluated = cache.size();
      std::size_t subproblems = 0, unconverged = 0;
      for (const auto& [k, r] : cache) {
        subproblems += r.subproblems;
        unconverged += r.subproblems_unconverged;
      }
      result.subproblems = subproblems;
      result.subproblems_unconverged = unconverged;
      break;
    }
    case SelectionStrategy::PerIterationEnumeration: {
      Rng sub_rng(derive_seed(base, subsets.size()));
      result = detail::per_iteration_enumeration(sc, config, sub_rng);
      break;
    }
  }
  result.strategy = config.strategy;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace risbr
