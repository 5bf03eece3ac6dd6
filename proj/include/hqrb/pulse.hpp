#pragma once

// Exchange-pulse synthesis for the hybrid qubit. An Rx(theta) gate is two
// steps (J1 active, then J2 active); an Rz(theta) gate is three steps (J1,
// J2, then J alone). The intra-dot exchange J = j_max / 2 is on throughout.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "hqrb/su2.hpp"

namespace hqrb {

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeviceParams {
  double j_max_ueV = 1.0;  ///< max(J1) = max(J2) = 2J
  double e_z_ueV = 0.25;   ///< Zeeman energy; unpublished, see README
  double t_min_ps = 100.0;

  double intra_dot_j() const { return 0.5 * j_max_ueV; }

  void validate() const {
    if (!(j_max_ueV > 0.0) || !std::isfinite(j_max_ueV)) {
      throw ValidationError("device.j_max_ueV must be positive");
    }
    if (!(e_z_ueV >= 0.0) || !std::isfinite(e_z_ueV)) {
      throw ValidationError("device.e_z_ueV must be non-negative");
    }
    if (!(t_min_ps >= 0.0) || !std::isfinite(t_min_ps)) {
      throw ValidationError("device.t_min_ps must be non-negative");
    }
  }
};

/// Constants of the analytic sequences (all in μeV).
struct SequenceConstants {
  double a;
  double b;
  double c;

  static SequenceConstants from(const DeviceParams& dp) {
    return {0.5 * dp.e_z_ueV + 0.125 * dp.j_max_ueV, -dp.e_z_ueV + 0.25 * dp.j_max_ueV,
            dp.e_z_ueV + 0.75 * dp.j_max_ueV};
  }
};

enum class RotationAxis { X, Z };

/// One constant-control segment. `axis` and `nominal_angle` record the part
/// of the gate's target rotation this step carries; the abstract-angle device
/// model consumes them, the Hamiltonian model ignores them.
struct PulseStep {
  double j1 = 0.0;  ///< μeV
  double j2 = 0.0;  ///< μeV
  double j = 0.0;   ///< μeV
  double duration_ns = 0.0;
  RotationAxis axis = RotationAxis::X;
  double nominal_angle = 0.0;

  /// Exchange that drives this step: J1, J2 or, on the J-only step, J.
  double driven_exchange() const {
    if (j1 != 0.0) return j1;
    if (j2 != 0.0) return j2;
    return j;
  }
};

struct GateSchedule {
  std::vector<PulseStep> steps;
  Unitary2 target;
  std::string label;

  double duration() const {
    double t = 0.0;
    for (const auto& s : steps) t += s.duration_ns;
    return t;
  }
};

inline double schedule_duration(const GateSchedule& g) { return g.duration(); }

/// Maps any angle to [0, 2pi).
inline double wrap_angle(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

namespace detail {

inline std::string angle_label(const char* name, double theta) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s(%.6f)", name, theta);
  return buf;
}

// Splits the segment rotation over its steps in proportion to duration.
inline void assign_shares(std::vector<PulseStep>& steps, RotationAxis axis, double theta) {
  double total = 0.0;
  for (const auto& s : steps) total += s.duration_ns;
  for (auto& s : steps) {
    s.axis = axis;
    s.nominal_angle = total > 0.0 ? theta * s.duration_ns / total : 0.0;
  }
}

inline void append(GateSchedule& into, const GateSchedule& next) {
  into.steps.insert(into.steps.end(), next.steps.begin(), next.steps.end());
  into.target = next.target * into.target;
}

}  // namespace detail

/// Two-step Rx(theta). Total duration is 2 n h / C for every theta.
inline GateSchedule synth_rx(double theta, const DeviceParams& dp) {
  dp.validate();
  const double w = wrap_angle(theta);
  const auto k = SequenceConstants::from(dp);
  const double imbalance = w / kTwoPi / std::sqrt(3.0);  // (1/sqrt3)(theta/2pi)
  const double n = std::ceil(k.c / dp.j_max_ueV * imbalance);
  const double t1 = (n / k.c - imbalance / dp.j_max_ueV) * kPlanck;
  const double t2 = (n / k.c + imbalance / dp.j_max_ueV) * kPlanck;
  if (t1 < 0.0) throw SynthesisError("synth_rx: step 1 (J1) has negative duration");
  if (t2 < 0.0) throw SynthesisError("synth_rx: step 2 (J2) has negative duration");

  const double j = dp.intra_dot_j();
  GateSchedule g;
  g.steps = {PulseStep{dp.j_max_ueV, 0.0, j, t1}, PulseStep{0.0, dp.j_max_ueV, j, t2}};
  detail::assign_shares(g.steps, RotationAxis::X, w);
  g.target = rx(w);
  g.label = detail::angle_label("Rx", theta);
  return g;
}

/// Length of the Rz J1/J2 steps before any period correction. sign(0) = +1.
inline double rz_raw_step(double wrapped_theta, const DeviceParams& dp) {
  const auto k = SequenceConstants::from(dp);
  const double sign = (2.0 * kPi / 3.0 - wrapped_theta) >= 0.0 ? 1.0 : -1.0;
  return (wrapped_theta / kPi * k.a + sign * k.b) / k.c * kPlanck / dp.j_max_ueV;
}

/// Jump of the Rz J1/J2 step length across theta = 2pi/3: 2 |B| h / (C J_max).
inline double rz_discontinuity_ns(const DeviceParams& dp) {
  const auto k = SequenceConstants::from(dp);
  return 2.0 * std::abs(k.b) / k.c * kPlanck / dp.j_max_ueV;
}

/// Three-step Rz(theta). A negative J1/J2 step is lengthened by the minimal
/// whole number of periods h / C.
inline GateSchedule synth_rz(double theta, const DeviceParams& dp) {
  dp.validate();
  const double w = wrap_angle(theta);
  const auto k = SequenceConstants::from(dp);
  double t12 = rz_raw_step(w, dp);
  if (t12 < 0.0) {
    const double period = kPlanck / k.c;
    t12 += std::ceil(-t12 / period) * period;
  }
  const double tj = (2.0 - w / kPi) * kPlanck / dp.j_max_ueV;
  if (t12 < 0.0) throw SynthesisError("synth_rz: J1/J2 steps have negative duration");
  if (tj < 0.0) throw SynthesisError("synth_rz: step 3 (J only) has negative duration");

  const double j = dp.intra_dot_j();
  GateSchedule g;
  g.steps = {PulseStep{dp.j_max_ueV, 0.0, j, t12}, PulseStep{0.0, dp.j_max_ueV, j, t12},
             PulseStep{0.0, 0.0, j, tj}};
  detail::assign_shares(g.steps, RotationAxis::Z, w);
  g.target = rz(w);
  g.label = detail::angle_label("Rz", theta);
  return g;
}

/// Y(theta) = Z(-pi/2) X(theta) Z(pi/2), played left to right in time.
inline GateSchedule synth_y(double theta, const DeviceParams& dp) {
  GateSchedule g = synth_rz(-kPi / 2.0, dp);
  detail::append(g, synth_rx(theta, dp));
  detail::append(g, synth_rz(kPi / 2.0, dp));
  g.label = detail::angle_label("Ry", theta);
  return g;
}

/// U(phi, theta, lambda) = Z_phi X_theta Z_lambda as an operator product, so
/// Z_lambda is played first.
inline GateSchedule synth_u(double phi, double theta, double lambda, const DeviceParams& dp) {
  GateSchedule g = synth_rz(lambda, dp);
  detail::append(g, synth_rx(theta, dp));
  detail::append(g, synth_rz(phi, dp));
  char buf[96];
  std::snprintf(buf, sizeof buf, "U(%.6f,%.6f,%.6f)", phi, theta, lambda);
  g.label = buf;
  return g;
}

inline GateSchedule synth_hadamard(const DeviceParams& dp) {
  GateSchedule g = synth_u(kPi / 2.0, kPi / 2.0, kPi / 2.0, dp);
  g.label = "H";
  return g;
}

inline GateSchedule identity_schedule() {
  GateSchedule g;
  g.label = "I";
  return g;
}

/// Indices of non-empty steps shorter than t_min. Advisory only.
inline std::vector<std::size_t> short_steps(const GateSchedule& g, const DeviceParams& dp) {
  std::vector<std::size_t> out;
  const double t_min_ns = dp.t_min_ps * 1e-3;
  for (std::size_t i = 0; i < g.steps.size(); ++i) {
    const double t = g.steps[i].duration_ns;
    if (t > 0.0 && t < t_min_ns) out.push_back(i);
  }
  return out;
}

}  // namespace hqrb
