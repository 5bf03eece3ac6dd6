#pragma once

// Randomized-benchmarking engine: sequence construction, noisy simulation
// and campaign aggregation.
//
// Every (N, sequence, repetition) task owns its RNG substreams:
//   sequence draws  <- (seed, N, s, kSequenceTag)
//   noise draws     <- (seed, N, s, r, kNoiseTag)
// so a curve is a pure function of the configuration, independent of the
// worker count. Aggregation runs over task index order with pairwise sums.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "hqrb/clifford.hpp"
#include "hqrb/device.hpp"
#include "hqrb/noise.hpp"
#include "hqrb/pulse.hpp"
#include "hqrb/rng.hpp"
#include "hqrb/su2.hpp"

namespace hqrb {

enum class InterleavedGate { X, Z, H };

inline const char* interleave_name(std::optional<InterleavedGate> g) {
  if (!g) return "none";
  switch (*g) {
    case InterleavedGate::X: return "x";
    case InterleavedGate::Z: return "z";
    case InterleavedGate::H: return "h";
  }
  return "?";
}

inline InterleavedGate parse_interleave(std::string_view s) {
  if (s == "x" || s == "X") return InterleavedGate::X;
  if (s == "z" || s == "Z") return InterleavedGate::Z;
  if (s == "h" || s == "H") return InterleavedGate::H;
  throw ValidationError("interleave gate must be one of x, z, h (got '" + std::string(s) + "')");
}

/// X = Rx(pi), Z = Rz(pi), H = U(pi/2, pi/2, pi/2).
inline GateSchedule interleave_schedule(InterleavedGate g, const DeviceParams& dp) {
  switch (g) {
    case InterleavedGate::X: return synth_rx(kPi, dp);
    case InterleavedGate::Z: return synth_rz(kPi, dp);
    case InterleavedGate::H: return synth_hadamard(dp);
  }
  throw ValidationError("unknown interleave gate");
}

using NoiseSpec = std::variant<QsgParams, OneOverFParams>;

inline const char* noise_model_name(const NoiseSpec& n) {
  return std::holds_alternative<QsgParams>(n) ? "qsg" : "one_over_f";
}

inline double noise_sigma_t_ps(const NoiseSpec& n) {
  return std::visit([](const auto& p) { return p.sigma_t_ps; }, n);
}

/// sigma_j for QSG; the power-matched sigma_j for 1/f.
inline double noise_sigma_j_neV(const NoiseSpec& n) {
  if (const auto* q = std::get_if<QsgParams>(&n)) return q->sigma_j_neV;
  return std::get<OneOverFParams>(n).sigma_j_neV();
}

inline std::vector<std::size_t> default_n_grid() { return {1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100}; }

struct RbConfig {
  DeviceParams device;
  DeviceModel model;
  NoiseSpec noise = QsgParams{};
  std::vector<std::size_t> n_grid = default_n_grid();
  std::size_t n_seq = 800;
  std::size_t n_rep = 10;
  std::optional<InterleavedGate> interleave;
  std::uint64_t seed = 1;

  void validate() const {
    device.validate();
    model.coefficients.validate();
    std::visit([](const auto& p) { p.validate(); }, noise);
    if (n_grid.empty()) throw ValidationError("rb.n_grid must not be empty");
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
      if (n_grid[i] <= n_grid[i - 1]) throw ValidationError("rb.n_grid must be strictly increasing");
    }
    if (n_seq < 1) throw ValidationError("rb.n_seq must be >= 1");
    if (n_rep < 1) throw ValidationError("rb.n_rep must be >= 1");
  }
};

enum class ElementRole { Random, Interleaved, Recovery };

struct SequenceElement {
  std::size_t clifford = 0;  ///< group index
  ElementRole role = ElementRole::Random;
};

/// Everything shared read-only by the tasks of one campaign.
class RbContext {
 public:
  RbContext(const DeviceParams& dp, std::optional<InterleavedGate> interleave)
      : device_(dp), group_(dp), interleave_(interleave) {
    if (interleave_) {
      interleave_schedule_ = interleave_schedule(*interleave_, dp);
      interleave_index_ = group_.index_of(interleave_schedule_.target);
    }
  }

  const DeviceParams& device() const { return device_; }
  const CliffordGroup& group() const { return group_; }
  std::optional<InterleavedGate> interleave() const { return interleave_; }
  std::size_t interleave_index() const { return interleave_index_; }

  const GateSchedule& schedule_of(const SequenceElement& e) const {
    return e.role == ElementRole::Interleaved ? interleave_schedule_ : group_[e.clifford].schedule;
  }

 private:
  DeviceParams device_;
  CliffordGroup group_;
  std::optional<InterleavedGate> interleave_;
  GateSchedule interleave_schedule_;
  std::size_t interleave_index_ = CliffordGroup::kIdentity;
};

/// N uniform Cliffords (each followed by the interleaved gate, if any) and
/// the exact group inverse of the whole product.
inline std::vector<SequenceElement> build_sequence(const RbContext& ctx, std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, CliffordGroup::kSize - 1);
  std::vector<SequenceElement> seq;
  seq.reserve(ctx.interleave() ? 2 * n + 1 : n + 1);
  std::size_t acc = CliffordGroup::kIdentity;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = pick(rng);
    seq.push_back({c, ElementRole::Random});
    acc = ctx.group().multiply(c, acc);
    if (ctx.interleave()) {
      seq.push_back({ctx.interleave_index(), ElementRole::Interleaved});
      acc = ctx.group().multiply(ctx.interleave_index(), acc);
    }
  }
  seq.push_back({ctx.group().inverse(acc), ElementRole::Recovery});
  return seq;
}

/// Realizes the sequence once under one noise draw and returns the overlap
/// of each cardinal state with its noisy image.
inline std::array<double, 6> simulate_sequence(const RbContext& ctx, std::span<const SequenceElement> elements,
                                               const NoiseSpec& noise, const DeviceModel& model, Rng& rng,
                                               RealizeStats* stats = nullptr) {
  const DeviceParams& dp = ctx.device();
  Unitary2 u;
  if (const auto* qsg = std::get_if<QsgParams>(&noise)) {
    QsgDraw sequence_draw;
    if (qsg->resample == Resample::PerSequence) sequence_draw = QsgDraw::sample(rng);
    for (const auto& e : elements) {
      const GateSchedule& g = ctx.schedule_of(e);
      const NoiseRealization r = sample_qsg(*qsg, g, dp, rng, &sequence_draw);
      u = realize(g, r, model, dp, stats) * u;
    }
  } else {
    const auto& one_f = std::get<OneOverFParams>(noise);
    std::vector<TimelineStep> timeline;
    std::vector<PulseStep> steps;
    double clock = 0.0;
    for (std::size_t gi = 0; gi < elements.size(); ++gi) {
      for (const auto& s : ctx.schedule_of(elements[gi]).steps) {
        timeline.push_back({clock, s.duration_ns, s.j1, s.j2, s.j, gi});
        steps.push_back(s);
        clock += s.duration_ns;
      }
    }
    const NoiseRealization r = sample_1f(one_f, timeline, rng);
    u = realize(std::span<const PulseStep>(steps), std::span<const StepPerturbation>(r.steps), model, dp, stats);
  }
  std::array<double, 6> out{};
  const auto states = cardinal_states();
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = state_fidelity(states[i], u.apply(states[i]));
  return out;
}

struct DecayPoint {
  std::size_t n = 0;
  double mean_fidelity = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct DecayCurve {
  std::vector<DecayPoint> points;
  std::size_t clamped_steps = 0;  ///< perturbed durations clamped to zero
};

namespace detail {

inline constexpr std::uint64_t kSequenceTag = 0x5345'5155'454e'4345ULL;
inline constexpr std::uint64_t kNoiseTag = 0x4e4f'4953'4500'0000ULL;

/// Pairwise (cascade) sum over a fixed index order.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers; rethrows
/// the first failure after all workers stop.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Full campaign. `threads` = 0 uses every hardware thread; the result does
/// not depend on it.
inline DecayCurve run_campaign(const RbConfig& config, unsigned threads = 1) {
  config.validate();
  const RbContext ctx(config.device, config.interleave);
  const unsigned workers = resolve_threads(threads);
  const std::size_t per_n = config.n_seq * config.n_rep;

  DecayCurve curve;
  std::vector<double> fidelities(per_n * 6);
  std::vector<std::size_t> clamps(per_n);
  for (std::size_t n : config.n_grid) {
    detail::parallel_for(per_n, workers, [&](std::size_t task) {
      const std::size_t s = task / config.n_rep;
      const std::size_t r = task % config.n_rep;
      Rng seq_rng = make_stream(config.seed, {n, s, detail::kSequenceTag});
      const auto seq = build_sequence(ctx, n, seq_rng);
      Rng noise_rng = make_stream(config.seed, {n, s, r, detail::kNoiseTag});
      RealizeStats stats;
      const auto f = simulate_sequence(ctx, seq, config.noise, config.model, noise_rng, &stats);
      std::copy(f.begin(), f.end(), fidelities.begin() + static_cast<std::ptrdiff_t>(6 * task));
      clamps[task] = stats.clamped_steps;
    });

    const double count = static_cast<double>(fidelities.size());
    const double mean = detail::pairwise_sum(fidelities) / count;
    std::vector<double> dev2(fidelities.size());
    for (std::size_t i = 0; i < fidelities.size(); ++i) dev2[i] = (fidelities[i] - mean) * (fidelities[i] - mean);
    const double var = fidelities.size() > 1 ? detail::pairwise_sum(dev2) / (count - 1.0) : 0.0;

    DecayPoint p;
    p.n = n;
    p.mean_fidelity = std::clamp(mean, 0.0, 1.0);
    p.std_error = std::sqrt(var / count);
    p.samples = fidelities.size();
    curve.points.push_back(p);
    for (std::size_t c : clamps) curve.clamped_steps += c;
  }
  return curve;
}

}  // namespace hqrb
