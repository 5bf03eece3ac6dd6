#pragma once

// Control-error realizations: quasi-static Gaussian (QSG) and 1/f.
//
// Amplitude errors are multiplicative: a channel carrying J is perturbed by
// J * g with g ~ N(0, sigma_j / J_max), so every driven step sees the same
// relative error scale. Timing errors are additive, dt ~ N(0, sigma_t).

#include <fftw3.h>

#include <algorithm>
#include <cstdint>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hqrb/pulse.hpp"
#include "hqrb/rng.hpp"

namespace hqrb {

class NoiseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How often a QSG draw is refreshed. A "gate" is one sequence element.
enum class Resample { PerStep, PerGate, PerSequence };

inline const char* resample_name(Resample r) {
  switch (r) {
    case Resample::PerStep: return "per_step";
    case Resample::PerGate: return "per_gate";
    case Resample::PerSequence: return "per_sequence";
  }
  return "?";
}

inline Resample parse_resample(std::string_view s) {
  if (s == "per_step") return Resample::PerStep;
  if (s == "per_gate") return Resample::PerGate;
  if (s == "per_sequence") return Resample::PerSequence;
  throw ValidationError("unknown resample policy '" + std::string(s) + "'");
}

struct StepPerturbation {
  double dt_ns = 0.0;
  double dj1_neV = 0.0;
  double dj2_neV = 0.0;
  double dj_neV = 0.0;

  bool operator==(const StepPerturbation&) const = default;
};

struct NoiseRealization {
  std::vector<StepPerturbation> steps;

  static NoiseRealization null(std::size_t n) { return NoiseRealization{std::vector<StepPerturbation>(n)}; }

  bool is_null() const {
    return std::all_of(steps.begin(), steps.end(), [](const StepPerturbation& s) { return s == StepPerturbation{}; });
  }

  bool operator==(const NoiseRealization&) const = default;
};

struct QsgParams {
  double sigma_t_ps = 0.0;
  double sigma_j_neV = 0.0;
  Resample resample = Resample::PerGate;

  void validate() const {
    if (!(sigma_t_ps >= 0.0) || !std::isfinite(sigma_t_ps)) throw ValidationError("noise.sigma_t_ps must be >= 0");
    if (!(sigma_j_neV >= 0.0) || !std::isfinite(sigma_j_neV)) throw ValidationError("noise.sigma_j_neV must be >= 0");
  }
};

/// Power-matching amplitude of the 1/f PSD A/(omega t0) that carries the same
/// power as a QSG amplitude error of standard deviation sigma_j, with
/// t0 = 1/f_max. Returns neV.
inline double calibrate_amplitude(double sigma_j_neV, double j_max_ueV, double f_min_hz, double f_max_hz) {
  if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz)) throw ValidationError("calibrate_amplitude: need 0 < f_min < f_max");
  if (!(j_max_ueV > 0.0)) throw ValidationError("calibrate_amplitude: j_max must be positive");
  if (!(sigma_j_neV >= 0.0)) throw ValidationError("calibrate_amplitude: sigma_j must be >= 0");
  const double t0_ns = 1e9 / f_max_hz;
  const double rate = (sigma_j_neV * 1e-3) / (j_max_ueV * t0_ns);
  return 1e3 * kPi * t0_ns * kPlanck * rate * rate / std::log(f_max_hz / f_min_hz);
}

/// Inverse of calibrate_amplitude: the sigma_j (neV) whose power a_j carries.
inline double matched_sigma_j(double a_j_neV, double j_max_ueV, double f_min_hz, double f_max_hz) {
  if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz)) throw ValidationError("matched_sigma_j: need 0 < f_min < f_max");
  if (!(a_j_neV >= 0.0)) throw ValidationError("matched_sigma_j: a_j must be >= 0");
  const double t0_ns = 1e9 / f_max_hz;
  const double rate = std::sqrt(a_j_neV * 1e-3 * std::log(f_max_hz / f_min_hz) / (kPi * t0_ns * kPlanck));
  return 1e3 * rate * t0_ns * j_max_ueV;
}

struct OneOverFParams {
  double a_j_neV = 0.0;
  double f_min_hz = 50e3;
  double f_max_hz = 10e9;
  double t0_ns = 0.1;  ///< 1 / f_max
  double sigma_t_ps = 0.0;
  double j_max_ueV = 1.0;  ///< reference exchange the trace is expressed against
  Resample timing_resample = Resample::PerGate;

  static OneOverFParams matched(double sigma_j_neV, double sigma_t_ps, double j_max_ueV, double f_min_hz = 50e3,
                                double f_max_hz = 10e9) {
    OneOverFParams p;
    p.f_min_hz = f_min_hz;
    p.f_max_hz = f_max_hz;
    p.t0_ns = 1e9 / f_max_hz;
    p.sigma_t_ps = sigma_t_ps;
    p.j_max_ueV = j_max_ueV;
    p.a_j_neV = calibrate_amplitude(sigma_j_neV, j_max_ueV, f_min_hz, f_max_hz);
    return p;
  }

  void validate() const {
    if (!(f_min_hz > 0.0) || !(f_max_hz > f_min_hz)) throw ValidationError("1/f noise: need 0 < f_min < f_max");
    if (!(std::abs(t0_ns * f_max_hz * 1e-9 - 1.0) <= 1e-12)) throw ValidationError("1/f noise: t0 must equal 1/f_max");
    if (!(a_j_neV >= 0.0)) throw ValidationError("1/f noise: a_j must be >= 0");
    if (!(sigma_t_ps >= 0.0)) throw ValidationError("1/f noise: sigma_t must be >= 0");
    if (!(j_max_ueV > 0.0)) throw ValidationError("1/f noise: j_max must be positive");
  }

  double sigma_j_neV() const { return matched_sigma_j(a_j_neV, j_max_ueV, f_min_hz, f_max_hz); }
  std::size_t trace_length() const { return static_cast<std::size_t>(std::ceil(f_max_hz / f_min_hz - 1e-9)); }
  double window_ns() const { return static_cast<double>(trace_length()) * t0_ns; }
};

// ---------------------------------------------------------------------------
// QSG

/// Standard-normal draws shared by the steps of one resample unit.
struct QsgDraw {
  double dt = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double gj = 0.0;

  static QsgDraw sample(Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    QsgDraw d;
    d.dt = n01(rng);
    d.g1 = n01(rng);
    d.g2 = n01(rng);
    d.gj = n01(rng);
    return d;
  }
};

namespace detail {

inline StepPerturbation scale_draw(const QsgDraw& d, const PulseStep& s, double sigma_t_ps, double sigma_j_neV,
                                   double j_max_ueV) {
  const double rel = sigma_j_neV / j_max_ueV;  // neV per μeV of carried exchange
  return StepPerturbation{d.dt * sigma_t_ps * 1e-3, d.g1 * rel * s.j1, d.g2 * rel * s.j2, d.gj * rel * s.j};
}

}  // namespace detail

/// One realization for one gate. With Resample::PerSequence the caller owns
/// the sequence-level draw and passes it in; otherwise it may be null.
inline NoiseRealization sample_qsg(const QsgParams& params, const GateSchedule& schedule, const DeviceParams& dp,
                                   Rng& rng, const QsgDraw* sequence_draw = nullptr) {
  NoiseRealization out;
  out.steps.reserve(schedule.steps.size());
  if (params.sigma_t_ps == 0.0 && params.sigma_j_neV == 0.0) {
    out.steps.resize(schedule.steps.size());
    return out;
  }
  QsgDraw shared;
  if (params.resample == Resample::PerGate) {
    shared = QsgDraw::sample(rng);
  } else if (params.resample == Resample::PerSequence) {
    if (sequence_draw == nullptr) throw ValidationError("sample_qsg: per-sequence resampling needs a sequence draw");
    shared = *sequence_draw;
  }
  for (const auto& step : schedule.steps) {
    const QsgDraw d = params.resample == Resample::PerStep ? QsgDraw::sample(rng) : shared;
    out.steps.push_back(detail::scale_draw(d, step, params.sigma_t_ps, params.sigma_j_neV, dp.j_max_ueV));
  }
  return out;
}

// ---------------------------------------------------------------------------
// FFT plumbing (FFTW, estimate-mode plans so results are reproducible)

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class InverseRealFft {
 public:
  explicit InverseRealFft(std::size_t n) : n_(n) {
    spectrum_ = fftw_alloc_complex(n / 2 + 1);
    signal_ = fftw_alloc_real(n);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spectrum_, signal_, FFTW_ESTIMATE);
  }
  ~InverseRealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(spectrum_);
    fftw_free(signal_);
  }
  InverseRealFft(const InverseRealFft&) = delete;
  InverseRealFft& operator=(const InverseRealFft&) = delete;

  std::size_t size() const { return n_; }
  fftw_complex* spectrum() { return spectrum_; }
  const double* signal() const { return signal_; }
  /// signal[n] = sum_k spectrum[k] e^{+2 pi i k n / N} over the Hermitian extension.
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  fftw_complex* spectrum_ = nullptr;
  double* signal_ = nullptr;
  fftw_plan plan_ = nullptr;
};

class ForwardRealFft {
 public:
  explicit ForwardRealFft(std::size_t n) : n_(n) {
    signal_ = fftw_alloc_real(n);
    spectrum_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), signal_, spectrum_, FFTW_ESTIMATE);
  }
  ~ForwardRealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(spectrum_);
    fftw_free(signal_);
  }
  ForwardRealFft(const ForwardRealFft&) = delete;
  ForwardRealFft& operator=(const ForwardRealFft&) = delete;

  double* signal() { return signal_; }
  const fftw_complex* spectrum() const { return spectrum_; }
  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  double* signal_ = nullptr;
  fftw_complex* spectrum_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline InverseRealFft& thread_inverse_fft(std::size_t n) {
  thread_local std::unique_ptr<InverseRealFft> fft;
  if (!fft || fft->size() != n) fft = std::make_unique<InverseRealFft>(n);
  return *fft;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1/f

namespace detail {

// Per-bin shape k^{-1/2} normalized so that sum_k 2 (a_k / 2)^2 = 1 over
// bins 1..(m-1)/2; cached per thread because every trace reuses it.
inline const std::vector<double>& unit_bin_amplitudes(std::size_t m) {
  thread_local std::size_t cached_m = 0;
  thread_local std::vector<double> amp;
  if (cached_m != m) {
    const std::size_t bins = (m - 1) / 2;
    double harmonic = 0.0;
    for (std::size_t k = 1; k <= bins; ++k) harmonic += 1.0 / static_cast<double>(k);
    const double level = std::sqrt(2.0 / harmonic);
    amp.assign(bins + 1, 0.0);
    for (std::size_t k = 1; k <= bins; ++k) amp[k] = 0.5 * level / std::sqrt(static_cast<double>(k));
    cached_m = m;
  }
  return amp;
}

// Uniform phase as a unit phasor: a point drawn uniformly in the unit disk
// has a uniformly distributed argument. Both coordinates come from one
// 64-bit draw (32 bits each).
inline void random_phasor(Rng& rng, double& c, double& s) {
  constexpr double kScale = 1.0 / 2147483648.0;  // 2^-31
  for (;;) {
    const std::uint64_t w = rng();
    const double x = static_cast<double>(static_cast<std::uint32_t>(w >> 32)) * kScale - 1.0;
    const double y = static_cast<double>(static_cast<std::uint32_t>(w)) * kScale - 1.0;
    const double r2 = x * x + y * y;
    if (r2 <= 1.0 && r2 > 1e-18) {
      const double inv = 1.0 / std::sqrt(r2);
      c = x * inv;
      s = y * inv;
      return;
    }
  }
}

// Synthesizes one trace into the calling thread's FFT buffer and returns it;
// valid until the next synthesis on this thread.
inline std::span<const double> synthesize_1f(const OneOverFParams& params, Rng& rng) {
  params.validate();
  const std::size_t m = params.trace_length();
  if (m < 4) throw ValidationError("1/f noise: f_max / f_min too small for a trace");
  const std::size_t bins = (m - 1) / 2;
  const double sigma = params.sigma_j_neV();
  const auto& amp = detail::unit_bin_amplitudes(m);

  auto& fft = detail::thread_inverse_fft(m);
  fftw_complex* spec = fft.spectrum();
  spec[0][0] = spec[0][1] = 0.0;
  for (std::size_t k = 1; k <= m / 2; ++k) {
    if (k > bins) {
      spec[k][0] = spec[k][1] = 0.0;
      continue;
    }
    double c = 0.0, s = 0.0;
    detail::random_phasor(rng, c, s);
    spec[k][0] = sigma * amp[k] * c;
    spec[k][1] = sigma * amp[k] * s;
  }
  fft.execute();
  return {fft.signal(), m};
}

}  // namespace detail

/// Full-window 1/f trace on the grid t_n = n t0 (n < trace_length()), in neV
/// referenced to j_max.
///
/// Frequency-domain synthesis: bin k (f_k = k / (M t0)) gets magnitude
/// proportional to f_k^{-1/2} and a uniform random phase, the spectrum is
/// Hermitian-extended and inverse transformed. DC and the Nyquist bin are
/// left empty. The level is set so the trace variance equals the matched
/// sigma_j^2, which makes the one-sided PSD proportional to a_j / (omega t0).
inline std::vector<double> generate_1f_full(const OneOverFParams& params, Rng& rng) {
  const auto t = detail::synthesize_1f(params, rng);
  return std::vector<double>(t.begin(), t.end());
}

/// Prefix of a fresh 1/f trace long enough to cover [0, total_duration_ns].
inline std::vector<double> generate_1f_trace(const OneOverFParams& params, double total_duration_ns, Rng& rng) {
  if (!(total_duration_ns > 0.0)) throw ValidationError("generate_1f_trace: duration must be positive");
  if (total_duration_ns > params.window_ns()) {
    throw NoiseError("generate_1f_trace: duration " + std::to_string(total_duration_ns) +
                     " ns exceeds the 1/f_min window of " + std::to_string(params.window_ns()) +
                     " ns; regenerate a trace per sequence instead of stretching one");
  }
  const auto full = detail::synthesize_1f(params, rng);
  const auto needed = std::min(full.size(), static_cast<std::size_t>(std::floor(total_duration_ns / params.t0_ns)) + 2);
  return std::vector<double>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(needed));
}

/// Welch estimate of the one-sided PSD (value^2 / Hz) with Hann windows and
/// 50% overlap. Returns (f_hz, psd) for bins 1 .. segment/2 - 1.
struct PsdBin {
  double f_hz;
  double psd;
};

inline std::vector<PsdBin> welch_psd(std::span<const double> x, double dt_ns, std::size_t segment) {
  if (segment < 8 || segment > x.size()) throw ValidationError("welch_psd: bad segment length");
  std::vector<double> window(segment);
  double wsum2 = 0.0;
  for (std::size_t i = 0; i < segment; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(segment));
    wsum2 += window[i] * window[i];
  }
  const double fs = 1e9 / dt_ns;
  const std::size_t hop = segment / 2;
  std::vector<double> acc(segment / 2 + 1, 0.0);
  std::size_t count = 0;
  detail::ForwardRealFft fft(segment);
  for (std::size_t start = 0; start + segment <= x.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment; ++i) mean += x[start + i];
    mean /= static_cast<double>(segment);
    for (std::size_t i = 0; i < segment; ++i) fft.signal()[i] = (x[start + i] - mean) * window[i];
    fft.execute();
    for (std::size_t k = 0; k < acc.size(); ++k) {
      acc[k] += fft.spectrum()[k][0] * fft.spectrum()[k][0] + fft.spectrum()[k][1] * fft.spectrum()[k][1];
    }
    ++count;
  }
  std::vector<PsdBin> out;
  for (std::size_t k = 1; k < segment / 2; ++k) {
    out.push_back({static_cast<double>(k) * fs / static_cast<double>(segment),
                   2.0 * acc[k] / (static_cast<double>(count) * fs * wsum2)});
  }
  return out;
}

/// A step placed on the sequence timeline.
struct TimelineStep {
  double start_ns = 0.0;
  double duration_ns = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  double j = 0.0;
  std::size_t gate_index = 0;
};

/// History-dependent amplitude errors: three independent traces (J1, J2, J)
/// per call, each step reading the trace value at its start time. Timing
/// errors stay Gaussian with the configured resample policy.
inline NoiseRealization sample_1f(const OneOverFParams& params, std::span<const TimelineStep> timeline, Rng& rng) {
  params.validate();
  NoiseRealization out;
  out.steps.resize(timeline.size());
  if (timeline.empty()) return out;

  double end = 0.0;
  for (const auto& s : timeline) end = std::max(end, s.start_ns + s.duration_ns);

  if (params.a_j_neV > 0.0) {
    const double span_ns = std::max(end, params.t0_ns);
    std::array<std::vector<double>, 3> traces;
    for (auto& t : traces) t = generate_1f_trace(params, span_ns, rng);
    for (std::size_t i = 0; i < timeline.size(); ++i) {
      const auto& s = timeline[i];
      const auto idx = std::min(traces[0].size() - 1, static_cast<std::size_t>(std::llround(s.start_ns / params.t0_ns)));
      out.steps[i].dj1_neV = traces[0][idx] * s.j1 / params.j_max_ueV;
      out.steps[i].dj2_neV = traces[1][idx] * s.j2 / params.j_max_ueV;
      out.steps[i].dj_neV = traces[2][idx] * s.j / params.j_max_ueV;
    }
  }

  if (params.sigma_t_ps > 0.0) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double sd = params.sigma_t_ps * 1e-3;
    double shared = 0.0;
    std::size_t current_gate = static_cast<std::size_t>(-1);
    if (params.timing_resample == Resample::PerSequence) shared = n01(rng);
    for (std::size_t i = 0; i < timeline.size(); ++i) {
      if (params.timing_resample == Resample::PerStep) {
        shared = n01(rng);
      } else if (params.timing_resample == Resample::PerGate && timeline[i].gate_index != current_gate) {
        current_gate = timeline[i].gate_index;
        shared = n01(rng);
      }
      out.steps[i].dt_ns = shared * sd;
    }
  }
  return out;
}

}  // namespace hqrb
