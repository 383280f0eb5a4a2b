// Complex linear-algebra kernel, projections and seeded sampling shared by every module.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace risbr {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a factorization or solve cannot be completed to tolerance.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

// *=== seeding ===*

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base) { return mix64(base); }

/// Order-sensitive hash of a seed with any number of integer keys.
template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key, Keys... rest) {
  return derive_seed(mix64(base ^ mix64(key + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

/**
 * Seeded 64-bit generator. Wraps std::mt19937_64, whose integer stream is fixed by the standard,
 * and maps integers to doubles with explicit arithmetic so the real-valued streams do not depend
 * on the standard library's distribution implementations.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0, 1), 53 random bits.
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Circularly-symmetric CN(0, 1).
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return Complex(re, im) * (1.0 / std::numbers::sqrt2);
  }

  /// Uniform phase on the unit circle.
  Complex unit_phasor() { return std::polar(1.0, 2.0 * std::numbers::pi * uniform()); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// i.i.d. CN(0, 1) entries, column-major fill order.
inline CMatrix sample_cn(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = rng.complex_normal();
  return out;
}

// *=== norms ===*

template <typename Derived>
double fro_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

template <typename Derived>
double vec_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.norm();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const Complex z = a(r, c);
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
  return true;
}

// *=== solves ===*

/**
 * Solves A X = B for Hermitian positive-definite A via Cholesky (LLT).
 *
 * If the factorization fails or the multiply-back residual exceeds 1e-10 relative, the solve is
 * retried once with A + 1e-12 trace(A)/N I before giving up.
 */
inline CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw InvalidInput("hermitian_solve: dimension mismatch");
  if (!all_finite(a) || !all_finite(b)) throw InvalidInput("hermitian_solve: non-finite entries");
  if (a.rows() == 0) return CMatrix(0, b.cols());

  const double b_norm = b.norm();
  auto attempt = [&](const CMatrix& lhs, CMatrix& x) {
    Eigen::LLT<CMatrix> llt(lhs);
    if (llt.info() != Eigen::Success) return false;
    x = llt.solve(b);
    if (!all_finite(x)) return false;
    return (a * x - b).norm() <= 1e-10 * b_norm || b_norm == 0.0;
  };

  CMatrix x;
  if (attempt(a, x)) return x;
  const double trace = a.diagonal().real().sum();
  const double load = 1e-12 * std::abs(trace) / static_cast<double>(a.rows());
  CMatrix loaded = a;
  loaded.diagonal().array() += load;
  if (attempt(loaded, x)) return x;
  throw NumericalFailure("hermitian_solve: matrix is not numerically positive definite");
}

// *=== projections ===*

/// Euclidean projection onto the ball of the given radius.
inline CVector project_ball(const CVector& v, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw InvalidInput("project_ball: radius must be finite and >= 0");
  const double n = v.norm();
  if (n <= radius) return v;
  CVector out = v * (radius / n);
  // rounding can leave the result a few ulps outside; shrink until it is inside so the map is idempotent
  while (out.norm() > radius) out *= 1.0 - 0x1.0p-52;
  return out;
}

/// Elementwise projection onto the closed unit disk; phases are preserved.
inline CVector project_unit_disk(const CVector& phi) {
  CVector out = phi;
  for (Eigen::Index m = 0; m < out.size(); ++m) {
    const double mag = std::abs(out(m));
    if (mag > 1.0) {
      out(m) /= mag;
      while (std::abs(out(m)) > 1.0) out(m) *= 1.0 - 0x1.0p-52;
    }
  }
  return out;
}

/// Dominant eigenvector of a Hermitian matrix (unit norm).
inline CVector principal_eigenvector(const CMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian);
  const Eigen::Index n = hermitian.rows();
  return eig.eigenvectors().col(n - 1);
}

}  // namespace risbr
