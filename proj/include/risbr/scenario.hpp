// One immutable network realization: hexagonal small-cell geometry, BS/RIS channels and
// the local-traffic profile of the surviving BSs.
//
// Geometry is planar. The disconnected BS sits at the origin, the surviving BSs occupy the nearest
// sites of a hexagonal lattice, and the RIS is placed at a configurable offset along +x.
//
// Channels follow a close-in pathloss model. Direct BS-BS links are NLOS Rayleigh; the BS-RIS and
// RIS-BS links are LOS with Rician small-scale fading whose deterministic part is the outer product
// of a half-wavelength ULA response (BS side) and a half-wavelength UPA response (RIS side).
#pragma once

#include "risbr/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

namespace risbr {

inline constexpr double kSpeedOfLight = 299'792'458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Physical and system-level parameters of a deployment.
struct SystemParams {
  std::size_t antennas = 4;          ///< N, antennas per BS
  std::size_t ris_elements = 512;    ///< M
  std::size_t surviving_bs = 7;      ///< L
  double max_power = 5.0;            ///< P_max [W]
  double bandwidth = 1e9;            ///< B [Hz]
  double carrier_frequency = 28e9;   ///< f_c [Hz]
  double noise_power = 1e-12;        ///< sigma^2 [W]
  double bbu_capacity = 1e9;         ///< C_0 [bit/s]
  double site_distance = 100.0;      ///< d_0 [m]
  double rician_factor = db_to_linear(9.0);  ///< kappa, linear
  double big_m = 1e10;               ///< big-M constant [bit/s]; kept for completeness

  void validate() const {
    if (antennas < 1) throw InvalidInput("antennas must be >= 1");
    if (surviving_bs < 1) throw InvalidInput("surviving_bs must be >= 1");
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(std::string(name) + " must be positive and finite");
    };
    positive(max_power, "max_power");
    positive(bandwidth, "bandwidth");
    positive(carrier_frequency, "carrier_frequency");
    positive(noise_power, "noise_power");
    positive(bbu_capacity, "bbu_capacity");
    positive(site_distance, "site_distance");
    positive(rician_factor, "rician_factor");
    positive(big_m, "big_m");
    if (big_m < bbu_capacity) throw InvalidInput("big_m must be >= bbu_capacity");
  }
};

/// Close-in pathloss exponents (UMi family).
struct PathlossModel {
  double los_exponent = 2.0;
  double nlos_exponent = 3.19;
};

enum class LinkType { Los, Nlos };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Azimuth of the direction from `from` towards `to`, radians.
inline double azimuth(Point from, Point to) { return std::atan2(to.y - from.y, to.x - from.x); }

struct Topology {
  Point disconnected;
  std::vector<Point> surviving;
  Point ris;
  std::vector<double> bs_distance;   ///< d_l
  std::vector<double> ris_distance;  ///< D_l
  double disconnected_ris_distance = 0.0;  ///< d-tilde
  double min_distance = 0.0;
  double max_distance = 0.0;
};

struct ChannelSet {
  std::vector<CMatrix> direct;    ///< H_l, N x N
  CMatrix to_ris;                 ///< G-tilde, M x N
  std::vector<CMatrix> from_ris;  ///< G_l, N x M
  std::vector<double> direct_gain;    ///< beta_NLOS(d_l)
  std::vector<double> from_ris_gain;  ///< beta_LOS(D_l)
  double to_ris_gain = 0.0;           ///< beta_LOS(d-tilde)
};

/// Local-traffic pattern: eta_l = alpha * s_l^gamma * eta + (1 - alpha) * eta + chi_l.
struct TrafficSettings {
  double intensity = 0.5;  ///< eta = C_d / C_0
  double alpha = 0.0;      ///< 0 uniform, > 0 hotspot
  double gamma = 2.0;
  double sigma_chi = 0.0;

  void validate() const {
    if (!(intensity >= 0.0 && intensity <= 1.0)) throw InvalidInput("traffic intensity must lie in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("traffic alpha must lie in [0, 1]");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("traffic gamma must be positive");
    if (!(sigma_chi >= 0.0) || !std::isfinite(sigma_chi)) throw InvalidInput("traffic sigma_chi must be >= 0");
  }
};

struct TrafficProfile {
  TrafficSettings settings;
  std::vector<double> load;  ///< eta_l after clamping to [0, 1]
  double demand = 0.0;       ///< C_d [bit/s]
  std::vector<double> local_traffic;  ///< C_l [bit/s]
  std::vector<double> spare;          ///< C_0 - C_l [bit/s]
};

struct ScenarioConfig {
  SystemParams system;
  PathlossModel pathloss;
  double ris_offset_fraction = 0.25;  ///< RIS at (fraction * d_0, 0)
  TrafficSettings traffic;

  void validate() const {
    system.validate();
    traffic.validate();
    if (!(pathloss.los_exponent > 0.0) || !(pathloss.nlos_exponent > 0.0))
      throw InvalidInput("pathloss exponents must be positive");
    if (!(ris_offset_fraction > 0.0) || !std::isfinite(ris_offset_fraction))
      throw InvalidInput("ris offset_fraction must be positive");
  }
};

/// A fully-built realization. Treated as immutable: pass by const reference.
struct Scenario {
  SystemParams params;
  PathlossModel pathloss;
  Topology topology;
  ChannelSet channels;
  TrafficProfile traffic;
  std::uint64_t seed = 0;

  std::size_t antennas() const { return params.antennas; }
  std::size_t ris_elements() const { return params.ris_elements; }
  std::size_t surviving() const { return params.surviving_bs; }
};

// *=== geometry ===*

/// Lattice sites (excluding the origin) within `rings` hexagonal rings, sorted by distance then
/// counterclockwise angle from +x.
inline std::vector<Point> hexagonal_sites(double site_distance, int rings) {
  struct Site {
    Point p;
    double dist;
    double angle;
  };
  std::vector<Site> sites;
  const double root3_half = std::sqrt(3.0) / 2.0;
  for (int q = -rings; q <= rings; ++q)
    for (int r = -rings; r <= rings; ++r) {
      const int s = -q - r;
      if (std::max({std::abs(q), std::abs(r), std::abs(s)}) > rings || (q == 0 && r == 0)) continue;
      Point p{site_distance * (q + 0.5 * r), site_distance * (root3_half * r)};
      double angle = std::atan2(p.y, p.x);
      if (angle < 0.0) angle += 2.0 * std::numbers::pi;
      // snap -0 rounding noise on the +x axis
      if (angle > 2.0 * std::numbers::pi - 1e-9) angle = 0.0;
      sites.push_back({p, std::hypot(p.x, p.y), angle});
    }
  const double tol = 1e-9 * site_distance;
  std::sort(sites.begin(), sites.end(), [tol](const Site& a, const Site& b) {
    if (std::abs(a.dist - b.dist) > tol) return a.dist < b.dist;
    return a.angle < b.angle;
  });
  std::vector<Point> out;
  out.reserve(sites.size());
  for (const auto& s : sites) out.push_back(s.p);
  return out;
}

inline Topology build_topology(const SystemParams& params, double ris_offset_fraction = 0.25) {
  constexpr int kRings = 3;
  const auto sites = hexagonal_sites(params.site_distance, kRings);
  if (params.surviving_bs < 1 || params.surviving_bs > sites.size())
    throw InvalidInput("surviving_bs must lie in [1, " + std::to_string(sites.size()) + "]");

  Topology topo;
  topo.disconnected = {0.0, 0.0};
  topo.surviving.assign(sites.begin(), sites.begin() + static_cast<std::ptrdiff_t>(params.surviving_bs));
  topo.ris = {ris_offset_fraction * params.site_distance, 0.0};
  topo.disconnected_ris_distance = distance(topo.disconnected, topo.ris);
  for (const auto& p : topo.surviving) {
    topo.bs_distance.push_back(distance(topo.disconnected, p));
    topo.ris_distance.push_back(distance(topo.ris, p));
  }
  topo.min_distance = *std::min_element(topo.bs_distance.begin(), topo.bs_distance.end());
  topo.max_distance = *std::max_element(topo.bs_distance.begin(), topo.bs_distance.end());
  return topo;
}

// *=== large-scale fading ===*

inline double free_space_loss_1m_db(double carrier_frequency) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * carrier_frequency / kSpeedOfLight);
}

/// Close-in pathloss PL(d) = FSPL(f_c, 1 m) + 10 n log10(d), in dB.
inline double pathloss_db(double carrier_frequency, double d, LinkType type, const PathlossModel& model = {}) {
  if (!(d >= 1.0)) throw InvalidInput("pathloss_db: distance must be >= 1 m");
  const double n = type == LinkType::Los ? model.los_exponent : model.nlos_exponent;
  return free_space_loss_1m_db(carrier_frequency) + 10.0 * n * std::log10(d);
}

inline double pathloss_gain(double carrier_frequency, double d, LinkType type, const PathlossModel& model = {}) {
  return db_to_linear(-pathloss_db(carrier_frequency, d, type, model));
}

// *=== small-scale fading ===*

/// Half-wavelength ULA steering vector; the array axis is +y so the phase progression is pi n sin(az).
inline CVector ula_response(std::size_t n, double az) {
  CVector a(static_cast<Eigen::Index>(n));
  const double step = std::numbers::pi * std::sin(az);
  for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i)) = std::polar(1.0, step * static_cast<double>(i));
  return a;
}

/// Rows x columns of the RIS panel: the largest divisor of M not above sqrt(M) gives the rows.
inline std::array<std::size_t, 2> ris_panel_shape(std::size_t m) {
  if (m == 0) return {0, 0};
  std::size_t rows = 1;
  for (std::size_t r = 1; r * r <= m; ++r)
    if (m % r == 0) rows = r;
  return {rows, m / rows};
}

/// Half-wavelength UPA response in the horizontal plane. Elements are numbered row-major; only the
/// horizontal index carries phase since all nodes share one elevation.
inline CVector upa_response(std::size_t m, double az) {
  const auto [rows, cols] = ris_panel_shape(m);
  CVector a(static_cast<Eigen::Index>(m));
  const double step = std::numbers::pi * std::sin(az);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      a(static_cast<Eigen::Index>(r * cols + c)) = std::polar(1.0, step * static_cast<double>(c));
  return a;
}

/// sqrt(kappa/(1+kappa)) * los + sqrt(1/(1+kappa)) * CN(0,1).
inline CMatrix rician_small_scale(const CMatrix& los, double kappa, Rng& rng) {
  const CMatrix diffuse = sample_cn(rng, los.rows(), los.cols());
  return std::sqrt(kappa / (1.0 + kappa)) * los + std::sqrt(1.0 / (1.0 + kappa)) * diffuse;
}

/**
 * Draws H_l, G-tilde and G_l.
 *
 * The direct links and the RIS links use independent substreams of `seed`, so toggling M leaves
 * the direct channels of a realization unchanged.
 */
inline ChannelSet build_channels(const SystemParams& params, const PathlossModel& pathloss, const Topology& topo,
                                 std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(params.antennas);
  const auto m = static_cast<Eigen::Index>(params.ris_elements);
  const double wavelength = kSpeedOfLight / params.carrier_frequency;
  const double fc = params.carrier_frequency;

  ChannelSet ch;
  Rng direct_rng(derive_seed(seed, 1));
  for (std::size_t l = 0; l < params.surviving_bs; ++l) {
    const double gain = pathloss_gain(fc, topo.bs_distance[l], LinkType::Nlos, pathloss);
    ch.direct_gain.push_back(gain);
    ch.direct.push_back(std::sqrt(gain) * sample_cn(direct_rng, n, n));
  }

  Rng ris_rng(derive_seed(seed, 2));
  auto propagation_phase = [wavelength](double d) { return std::polar(1.0, -2.0 * std::numbers::pi * d / wavelength); };

  const double dt = topo.disconnected_ris_distance;
  ch.to_ris_gain = pathloss_gain(fc, dt, LinkType::Los, pathloss);
  if (m > 0) {
    const CVector arrive = upa_response(params.ris_elements, azimuth(topo.ris, topo.disconnected));
    const CVector depart = ula_response(params.antennas, azimuth(topo.disconnected, topo.ris));
    const CMatrix los = propagation_phase(dt) * arrive * depart.adjoint();
    ch.to_ris = std::sqrt(ch.to_ris_gain) * rician_small_scale(los, params.rician_factor, ris_rng);
  } else {
    ch.to_ris = CMatrix(0, n);
  }

  for (std::size_t l = 0; l < params.surviving_bs; ++l) {
    const double dl = topo.ris_distance[l];
    const double gain = pathloss_gain(fc, dl, LinkType::Los, pathloss);
    ch.from_ris_gain.push_back(gain);
    if (m > 0) {
      const CVector arrive = ula_response(params.antennas, azimuth(topo.surviving[l], topo.ris));
      const CVector depart = upa_response(params.ris_elements, azimuth(topo.ris, topo.surviving[l]));
      const CMatrix los = propagation_phase(dl) * arrive * depart.adjoint();
      ch.from_ris.push_back(std::sqrt(gain) * rician_small_scale(los, params.rician_factor, ris_rng));
    } else {
      ch.from_ris.push_back(CMatrix(n, 0));
    }
  }
  return ch;
}

// *=== traffic ===*

/// Per-BS local load. When every survivor is equidistant the distance factor is taken as 1.
inline TrafficProfile traffic_profile(const SystemParams& params, const Topology& topo, const TrafficSettings& settings,
                                      Rng& rng) {
  settings.validate();
  TrafficProfile tp;
  tp.settings = settings;
  tp.demand = settings.intensity * params.bbu_capacity;
  const double span = topo.max_distance - topo.min_distance;
  for (std::size_t l = 0; l < topo.surviving.size(); ++l) {
    const double closeness = span > 0.0 ? (topo.max_distance - topo.bs_distance[l]) / span : 1.0;
    const double chi = settings.sigma_chi * rng.normal();
    double eta = settings.alpha * std::pow(closeness, settings.gamma) * settings.intensity +
                 (1.0 - settings.alpha) * settings.intensity + chi;
    eta = std::clamp(eta, 0.0, 1.0);
    tp.load.push_back(eta);
    tp.local_traffic.push_back(eta * params.bbu_capacity);
    tp.spare.push_back(params.bbu_capacity - eta * params.bbu_capacity);
  }
  return tp;
}

inline Scenario build_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Scenario sc;
  sc.params = config.system;
  sc.pathloss = config.pathloss;
  sc.seed = seed;
  sc.topology = build_topology(config.system, config.ris_offset_fraction);
  if (sc.topology.disconnected_ris_distance < 1.0) throw InvalidInput("RIS must be at least 1 m from the disconnected BS");
  sc.channels = build_channels(config.system, config.pathloss, sc.topology, seed);
  Rng traffic_rng(derive_seed(seed, 3));
  sc.traffic = traffic_profile(config.system, sc.topology, config.traffic, traffic_rng);
  return sc;
}

/// Assembles a scenario from explicit channels and spare capacities (synthetic instances, tests).
inline Scenario make_scenario(const SystemParams& params, ChannelSet channels, double demand,
                              const std::vector<double>& local_traffic, std::uint64_t seed = 0) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(params.antennas);
  const auto m = static_cast<Eigen::Index>(params.ris_elements);
  const std::size_t l_count = params.surviving_bs;
  if (channels.direct.size() != l_count || channels.from_ris.size() != l_count || local_traffic.size() != l_count)
    throw InvalidInput("make_scenario: per-BS arrays must have L entries");
  if (channels.to_ris.rows() != m || channels.to_ris.cols() != n) throw InvalidInput("make_scenario: G-tilde shape");
  for (std::size_t l = 0; l < l_count; ++l) {
    if (channels.direct[l].rows() != n || channels.direct[l].cols() != n) throw InvalidInput("make_scenario: H_l shape");
    if (channels.from_ris[l].rows() != n || channels.from_ris[l].cols() != m)
      throw InvalidInput("make_scenario: G_l shape");
  }
  Scenario sc;
  sc.params = params;
  sc.seed = seed;
  sc.channels = std::move(channels);
  sc.topology.surviving.assign(l_count, Point{});
  sc.topology.bs_distance.assign(l_count, 0.0);
  sc.topology.ris_distance.assign(l_count, 0.0);
  sc.traffic.demand = demand;
  sc.traffic.settings.intensity = demand / params.bbu_capacity;
  for (double c : local_traffic) {
    if (c < 0.0 || c > params.bbu_capacity) throw InvalidInput("make_scenario: local traffic outside [0, C_0]");
    sc.traffic.local_traffic.push_back(c);
    sc.traffic.load.push_back(c / params.bbu_capacity);
    sc.traffic.spare.push_back(params.bbu_capacity - c);
  }
  return sc;
}

}  // namespace risbr
