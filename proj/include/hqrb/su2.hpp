#pragma once

// Two-level quantum math: pure states, 2x2 unitaries, rotations, constant-
// generator propagators and fidelities. Global phase is never tracked; use
// gate_fidelity for phase-insensitive comparisons.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hqrb {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Planck constant in the unit system used throughout: energies in μeV,
/// times in ns.
inline constexpr double kPlanck = 4.135667696;

/// Invalid input (bad parameter, malformed file, broken precondition).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline constexpr Vec3 kAxisX{1.0, 0.0, 0.0};
inline constexpr Vec3 kAxisY{0.0, 1.0, 0.0};
inline constexpr Vec3 kAxisZ{0.0, 0.0, 1.0};

class PureState {
 public:
  PureState() : a0_(1.0, 0.0), a1_(0.0, 0.0) {}

  /// Throws ValidationError unless |a0|^2 + |a1|^2 = 1 within 1e-12.
  PureState(Complex a0, Complex a1) : a0_(a0), a1_(a1) {
    const double n = std::norm(a0) + std::norm(a1);
    if (!(std::abs(n - 1.0) <= 1e-12)) {
      throw ValidationError("PureState: amplitudes are not normalized (norm^2 = " +
                            std::to_string(n) + ")");
    }
  }

  /// Normalizes (a0, a1); throws on a zero vector.
  static PureState normalized(Complex a0, Complex a1) {
    const double n = std::sqrt(std::norm(a0) + std::norm(a1));
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw ValidationError("PureState: cannot normalize a zero or non-finite vector");
    }
    PureState s;
    s.a0_ = a0 / n;
    s.a1_ = a1 / n;
    return s;
  }

  Complex amplitude0() const { return a0_; }
  Complex amplitude1() const { return a1_; }

 private:
  friend class Unitary2;
  static PureState unchecked(Complex a0, Complex a1) {
    PureState s;
    s.a0_ = a0;
    s.a1_ = a1;
    return s;
  }

  Complex a0_;
  Complex a1_;
};

/// Row-major 2x2 complex matrix. Construction does not check unitarity;
/// call is_unitary() or require_unitary() where the contract needs it.
class Unitary2 {
 public:
  constexpr Unitary2() : m_{Complex(1.0), Complex(0.0), Complex(0.0), Complex(1.0)} {}
  constexpr Unitary2(Complex m00, Complex m01, Complex m10, Complex m11)
      : m_{m00, m01, m10, m11} {}

  static constexpr Unitary2 identity() { return Unitary2(); }

  Complex operator()(int row, int col) const { return m_[static_cast<std::size_t>(2 * row + col)]; }

  Unitary2 operator*(const Unitary2& o) const {
    return Unitary2(m_[0] * o.m_[0] + m_[1] * o.m_[2], m_[0] * o.m_[1] + m_[1] * o.m_[3],
                    m_[2] * o.m_[0] + m_[3] * o.m_[2], m_[2] * o.m_[1] + m_[3] * o.m_[3]);
  }

  Unitary2& operator*=(const Unitary2& o) { return *this = *this * o; }

  Unitary2 adjoint() const {
    return Unitary2(std::conj(m_[0]), std::conj(m_[2]), std::conj(m_[1]), std::conj(m_[3]));
  }

  Complex trace() const { return m_[0] + m_[3]; }
  Complex det() const { return m_[0] * m_[3] - m_[1] * m_[2]; }

  PureState apply(const PureState& s) const {
    return PureState::unchecked(m_[0] * s.a0_ + m_[1] * s.a1_, m_[2] * s.a0_ + m_[3] * s.a1_);
  }

  /// Largest entrywise deviation of U^dagger U from the identity.
  double unitarity_error() const {
    const Unitary2 p = adjoint() * *this;
    double e = std::max(std::abs(p.m_[0] - 1.0), std::abs(p.m_[3] - 1.0));
    e = std::max(e, std::abs(p.m_[1]));
    e = std::max(e, std::abs(p.m_[2]));
    return std::max(e, std::abs(std::abs(det()) - 1.0));
  }

  bool is_unitary(double tol = 1e-10) const { return unitarity_error() <= tol; }

  const Unitary2& require_unitary(const char* what) const {
    if (!is_unitary()) {
      throw ValidationError(std::string(what) + ": matrix is not unitary within 1e-10");
    }
    return *this;
  }

  const std::array<Complex, 4>& entries() const { return m_; }

 private:
  std::array<Complex, 4> m_;
};

/// exp(-i * angle * (axis . sigma) / 2). The axis must be a unit vector.
inline Unitary2 rotation(const Vec3& axis, double angle) {
  if (!(std::abs(axis.norm() - 1.0) <= 1e-9)) {
    throw ValidationError("rotation: axis is not a unit vector");
  }
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  return Unitary2(Complex(c, -s * axis.z), Complex(-s * axis.y, -s * axis.x),
                  Complex(s * axis.y, -s * axis.x), Complex(c, s * axis.z));
}

inline Unitary2 rx(double angle) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  return Unitary2(Complex(c, 0.0), Complex(0.0, -s), Complex(0.0, -s), Complex(c, 0.0));
}

inline Unitary2 ry(double angle) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  return Unitary2(Complex(c, 0.0), Complex(-s, 0.0), Complex(s, 0.0), Complex(c, 0.0));
}

inline Unitary2 rz(double angle) {
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  return Unitary2(Complex(c, -s), Complex(0.0), Complex(0.0), Complex(c, s));
}

/// Constant two-level generator H = h_x sigma_x + h_z sigma_z (energies in μeV).
struct StepGenerator {
  double h_x = 0.0;
  double h_z = 0.0;

  double splitting() const { return std::hypot(h_x, h_z); }
};

/// exp(-i 2pi (h_x sigma_x + h_z sigma_z) t / (2h)), i.e. a rotation by
/// 2pi E t / h about (h_x, 0, h_z)/E.
inline Unitary2 propagator(const StepGenerator& g, double duration_ns) {
  if (!(duration_ns >= 0.0)) {
    throw ValidationError("propagator: negative duration");
  }
  if (!std::isfinite(g.h_x) || !std::isfinite(g.h_z)) {
    throw ValidationError("propagator: non-finite generator");
  }
  const double e = g.splitting();
  if (e == 0.0 || duration_ns == 0.0) {
    return Unitary2::identity();
  }
  const double angle = kTwoPi * e * duration_ns / kPlanck;
  return rotation(Vec3{g.h_x / e, 0.0, g.h_z / e}, angle);
}

/// |<a|b>|^2
inline double state_fidelity(const PureState& a, const PureState& b) {
  const Complex overlap = std::conj(a.amplitude0()) * b.amplitude0() + std::conj(a.amplitude1()) * b.amplitude1();
  return std::min(1.0, std::norm(overlap));
}

/// Average gate fidelity (|Tr(U^dagger V)|^2 + 2) / 6. Insensitive to global phase.
inline double gate_fidelity(const Unitary2& u, const Unitary2& v) {
  u.require_unitary("gate_fidelity");
  v.require_unitary("gate_fidelity");
  const Complex t = (u.adjoint() * v).trace();
  return std::min(1.0, (std::norm(t) + 2.0) / 6.0);
}

/// The six cardinal Bloch states |0>, |+>, |->, |+i>, |-i>, |1>.
inline std::array<PureState, 6> cardinal_states() {
  const double r = std::numbers::sqrt2 / 2.0;
  return {PureState(Complex(1.0), Complex(0.0)),           PureState(Complex(r), Complex(r)),
          PureState(Complex(r), Complex(-r)),              PureState(Complex(r), Complex(0.0, r)),
          PureState(Complex(r), Complex(0.0, -r)),         PureState(Complex(0.0), Complex(1.0))};
}

}  // namespace hqrb
