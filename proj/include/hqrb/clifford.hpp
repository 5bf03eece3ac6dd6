#pragma once

// The 24-element single-qubit Clifford group.
//
// Group algebra is exact: each element is carried as the integer signed
// permutation matrix it induces on the Pauli axes (its SO(3) image), which
// is SU(2) modulo the sign of the quaternion. Products, inverses and
// lookups never touch floating point.
//
// Decompositions are shortest words over the native set, found by a
// breadth-first search that tries generators in the fixed order
// X(pi), X(pi/2), X(-pi/2), Y(pi), Y(pi/2), Y(-pi/2); the first word that
// reaches an element wins. Words are listed in time order.

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hqrb/pulse.hpp"
#include "hqrb/su2.hpp"

namespace hqrb {

enum class NativeGate { I, X180, X90, Xm90, Y180, Y90, Ym90 };

inline const char* native_name(NativeGate g) {
  switch (g) {
    case NativeGate::I: return "I";
    case NativeGate::X180: return "X(pi)";
    case NativeGate::X90: return "X(pi/2)";
    case NativeGate::Xm90: return "X(-pi/2)";
    case NativeGate::Y180: return "Y(pi)";
    case NativeGate::Y90: return "Y(pi/2)";
    case NativeGate::Ym90: return "Y(-pi/2)";
  }
  return "?";
}

/// Integer 3x3 rotation of the Pauli axes, row-major.
struct AxisRotation {
  std::array<int, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  int operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

  AxisRotation operator*(const AxisRotation& o) const {
    AxisRotation p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        int s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(r, k) * o(k, c);
        p.m[static_cast<std::size_t>(3 * r + c)] = s;
      }
    }
    return p;
  }

  AxisRotation transpose() const {
    AxisRotation t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.m[static_cast<std::size_t>(3 * r + c)] = (*this)(c, r);
    return t;
  }

  bool operator==(const AxisRotation&) const = default;
  auto operator<=>(const AxisRotation&) const = default;
};

/// R_ij = Tr(sigma_i U sigma_j U^dagger) / 2, rounded. Only meaningful for
/// unitaries that permute the Pauli axes.
inline AxisRotation axis_rotation_of(const Unitary2& u) {
  const std::array<Unitary2, 3> pauli = {Unitary2(0.0, 1.0, 1.0, 0.0),
                                         Unitary2(0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0),
                                         Unitary2(1.0, 0.0, 0.0, -1.0)};
  AxisRotation r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double v = 0.5 * (pauli[static_cast<std::size_t>(i)] * u * pauli[static_cast<std::size_t>(j)] * u.adjoint()).trace().real();
      r.m[static_cast<std::size_t>(3 * i + j)] = static_cast<int>(std::lround(v));
    }
  }
  return r;
}

inline AxisRotation native_axis_rotation(NativeGate g) {
  switch (g) {
    case NativeGate::I: return AxisRotation{};
    case NativeGate::X180: return AxisRotation{{1, 0, 0, 0, -1, 0, 0, 0, -1}};
    case NativeGate::X90: return AxisRotation{{1, 0, 0, 0, 0, -1, 0, 1, 0}};
    case NativeGate::Xm90: return AxisRotation{{1, 0, 0, 0, 0, 1, 0, -1, 0}};
    case NativeGate::Y180: return AxisRotation{{-1, 0, 0, 0, 1, 0, 0, 0, -1}};
    case NativeGate::Y90: return AxisRotation{{0, 0, 1, 0, 1, 0, -1, 0, 0}};
    case NativeGate::Ym90: return AxisRotation{{0, 0, -1, 0, 1, 0, 1, 0, 0}};
  }
  return AxisRotation{};
}

inline Unitary2 native_unitary(NativeGate g) {
  switch (g) {
    case NativeGate::I: return Unitary2::identity();
    case NativeGate::X180: return rx(kPi);
    case NativeGate::X90: return rx(kPi / 2.0);
    case NativeGate::Xm90: return rx(-kPi / 2.0);
    case NativeGate::Y180: return ry(kPi);
    case NativeGate::Y90: return ry(kPi / 2.0);
    case NativeGate::Ym90: return ry(-kPi / 2.0);
  }
  return Unitary2::identity();
}

inline GateSchedule native_schedule(NativeGate g, const DeviceParams& dp) {
  switch (g) {
    case NativeGate::I: return identity_schedule();
    case NativeGate::X180: return synth_rx(kPi, dp);
    case NativeGate::X90: return synth_rx(kPi / 2.0, dp);
    case NativeGate::Xm90: return synth_rx(-kPi / 2.0, dp);
    case NativeGate::Y180: return synth_y(kPi, dp);
    case NativeGate::Y90: return synth_y(kPi / 2.0, dp);
    case NativeGate::Ym90: return synth_y(-kPi / 2.0, dp);
  }
  return identity_schedule();
}

struct CliffordElement {
  std::size_t group_index = 0;
  std::vector<NativeGate> decomposition;  ///< time order
  Unitary2 unitary;                       ///< product of the native unitaries
  AxisRotation rotation;                  ///< exact group representative
  GateSchedule schedule;                  ///< concatenated native schedules
};

class CliffordGroup {
 public:
  static constexpr std::size_t kSize = 24;
  static constexpr std::size_t kIdentity = 0;

  explicit CliffordGroup(const DeviceParams& dp) {
    dp.validate();
    constexpr std::array<NativeGate, 6> generators = {NativeGate::X180, NativeGate::X90, NativeGate::Xm90,
                                                      NativeGate::Y180, NativeGate::Y90, NativeGate::Ym90};
    std::array<GateSchedule, 6> gen_schedules;
    for (std::size_t i = 0; i < generators.size(); ++i) gen_schedules[i] = native_schedule(generators[i], dp);

    CliffordElement id;
    id.decomposition = {NativeGate::I};
    id.schedule = identity_schedule();
    add(std::move(id));

    std::vector<std::size_t> frontier = {0};
    while (!frontier.empty()) {
      std::vector<std::size_t> next;
      for (std::size_t parent : frontier) {
        for (std::size_t gi = 0; gi < generators.size(); ++gi) {
          const AxisRotation r = native_axis_rotation(generators[gi]) * elements_[parent].rotation;
          if (index_.contains(r)) continue;
          CliffordElement e;
          e.decomposition = elements_[parent].decomposition;
          if (e.decomposition.size() == 1 && e.decomposition[0] == NativeGate::I) e.decomposition.clear();
          e.decomposition.push_back(generators[gi]);
          e.schedule = elements_[parent].schedule;
          detail::append(e.schedule, gen_schedules[gi]);
          next.push_back(add(std::move(e)));
        }
      }
      frontier = std::move(next);
    }
    if (elements_.size() != kSize) throw std::logic_error("CliffordGroup: closure did not yield 24 elements");

    for (std::size_t a = 0; a < kSize; ++a) {
      for (std::size_t b = 0; b < kSize; ++b) {
        product_[a][b] = index_.at(elements_[a].rotation * elements_[b].rotation);
      }
      inverse_[a] = index_.at(elements_[a].rotation.transpose());
    }
  }

  std::size_t size() const { return kSize; }
  const CliffordElement& operator[](std::size_t i) const { return elements_.at(i); }
  const std::vector<CliffordElement>& elements() const { return elements_; }

  /// Index of U_a * U_b (b acts first).
  std::size_t multiply(std::size_t a, std::size_t b) const { return product_.at(a).at(b); }
  std::size_t inverse(std::size_t a) const { return inverse_.at(a); }

  /// Group index of a Clifford unitary; throws ValidationError otherwise.
  std::size_t index_of(const Unitary2& u) const {
    u.require_unitary("CliffordGroup::index_of");
    const auto it = index_.find(axis_rotation_of(u));
    if (it == index_.end() || gate_fidelity(u, elements_[it->second].unitary) < 1.0 - 1e-9) {
      throw ValidationError("CliffordGroup::index_of: unitary is not a Clifford");
    }
    return it->second;
  }

  std::string describe(std::size_t i) const {
    std::string s;
    for (NativeGate g : elements_.at(i).decomposition) {
      if (!s.empty()) s += " ";
      s += native_name(g);
    }
    return s;
  }

 private:
  std::size_t add(CliffordElement e) {
    e.group_index = elements_.size();
    e.unitary = Unitary2::identity();
    e.rotation = AxisRotation{};
    for (NativeGate g : e.decomposition) {
      e.unitary = native_unitary(g) * e.unitary;
      e.rotation = native_axis_rotation(g) * e.rotation;
    }
    index_.emplace(e.rotation, e.group_index);
    elements_.push_back(std::move(e));
    elements_.back().schedule.label = "C" + std::to_string(elements_.back().group_index) + "[" +
                                      describe(elements_.back().group_index) + "]";
    return elements_.back().group_index;
  }

  std::vector<CliffordElement> elements_;
  std::map<AxisRotation, std::size_t> index_;
  std::array<std::array<std::size_t, kSize>, kSize> product_{};
  std::array<std::size_t, kSize> inverse_{};
};

}  // namespace hqrb
