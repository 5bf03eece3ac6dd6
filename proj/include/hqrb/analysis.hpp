#pragma once

// Decay fitting, error per Clifford, interleaved gate error and its bounds,
// and sigma_t x sigma_j sweeps.
//
// The decay model is f(N) = f_a + f_b p^N, fitted by unweighted
// Levenberg-Marquardt least squares. p is carried internally as
// logistic(u) so it stays inside [0, 1]. The asymptote f_a is boxed to
// [0, 1]: when the curve barely decays over the sampled lengths, the
// unconstrained least-squares surface has a valley running to f_a -> -inf,
// p -> 1, and the box keeps the fit on physically admissible curves.
// Standard errors are the linearized covariance s^2 (J^T J)^{-1} in natural
// parameters.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqrb/noise.hpp"
#include "hqrb/rb.hpp"
#include "hqrb/su2.hpp"

namespace hqrb {

struct FitResult {
  double f_a = 0.0;
  double f_b = 0.0;
  double p = 0.0;
  double se_f_a = 0.0;
  double se_f_b = 0.0;
  double se_p = 0.0;
  double epc = 0.0;
  double se_epc = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool at_boundary = false;  ///< p pinned at 0 or 1; standard errors not meaningful
  bool f_a_at_bound = false;  ///< asymptote held at 0 or 1 (weakly decaying curve)
};

struct FitGuess {
  double f_a = 0.5;
  double f_b = 0.5;
  double p = 0.99;
};

/// d f / d (f_a, f_b, p) at length n.
inline std::array<double, 3> decay_jacobian(double n, double f_a, double f_b, double p) {
  (void)f_a;
  const double pn = std::pow(p, n);
  const double dp = n == 0.0 ? 0.0 : f_b * n * std::pow(p, n - 1.0);
  return {1.0, pn, dp};
}

inline double decay_model(double n, double f_a, double f_b, double p) { return f_a + f_b * std::pow(p, n); }

namespace detail {

inline double logistic(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Solves the symmetric 3x3 system a x = b by Gaussian elimination with
// partial pivoting. Returns false if singular.
inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (!(std::abs(a[piv][c]) > 0.0)) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return true;
}

inline bool invert3(const std::array<std::array<double, 3>, 3>& a, std::array<std::array<double, 3>, 3>& inv) {
  for (int c = 0; c < 3; ++c) {
    std::array<double, 3> e{};
    e[c] = 1.0;
    std::array<double, 3> col{};
    if (!solve3(a, e, col)) return false;
    for (int r = 0; r < 3; ++r) inv[r][c] = col[r];
  }
  return true;
}

}  // namespace detail

/// Fits f_a + f_b p^N to (n, f). Needs at least four distinct lengths.
inline FitResult fit_decay(std::span<const double> n, std::span<const double> f, FitGuess guess = {},
                           int max_iterations = 500) {
  if (n.size() != f.size()) throw ValidationError("fit_decay: length mismatch");
  {
    std::vector<double> distinct(n.begin(), n.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw ValidationError("fit_decay: need at least 4 distinct sequence lengths");
  }
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!std::isfinite(n[i]) || !std::isfinite(f[i]) || n[i] < 0.0) {
      throw ValidationError("fit_decay: non-finite or negative input");
    }
  }

  FitResult out;
  const std::size_t m = n.size();

  // A flat curve carries no decay information: p sits on the boundary.
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi))) {
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(m);
    out.p = 1.0;
    out.f_b = guess.f_b;
    out.f_a = mean - guess.f_b;
    out.epc = 0.0;
    out.at_boundary = true;
    out.converged = false;
    return out;
  }

  const double p0 = std::clamp(guess.p, 1e-12, 1.0 - 1e-12);
  std::array<double, 3> x = {std::clamp(guess.f_a, 0.0, 1.0), guess.f_b, detail::logit(p0)};

  auto residuals = [&](const std::array<double, 3>& q, std::vector<double>& r) {
    const double p = detail::logistic(q[2]);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = f[i] - decay_model(n[i], q[0], q[1], p);
      s += r[i] * r[i];
    }
    return s;
  };
  // Normal equations in (f_a, f_b, u).
  auto normal_equations = [&](const std::array<double, 3>& q, const std::vector<double>& r,
                              std::array<std::array<double, 3>, 3>& jtj, std::array<double, 3>& jtr) {
    const double p = detail::logistic(q[2]);
    const double dp_du = p * (1.0 - p);
    jtj = {};
    jtr = {};
    for (std::size_t i = 0; i < m; ++i) {
      auto jac = decay_jacobian(n[i], q[0], q[1], p);
      jac[2] *= dp_du;
      for (int a = 0; a < 3; ++a) {
        jtr[a] += jac[a] * r[i];
        for (int b = 0; b < 3; ++b) jtj[a][b] += jac[a] * jac[b];
      }
    }
  };
  // f_a is held on its bound while the descent direction points outward.
  auto f_a_pinned = [](double f_a, double descent) {
    return (f_a <= 0.0 && descent < 0.0) || (f_a >= 1.0 && descent > 0.0);
  };
  auto pin_f_a = [](std::array<std::array<double, 3>, 3>& a, std::array<double, 3>& b) {
    for (int k = 0; k < 3; ++k) a[0][k] = a[k][0] = 0.0;
    a[0][0] = 1.0;
    b[0] = 0.0;
  };

  std::vector<double> r(m), r_try(m);
  double sse = residuals(x, r);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (it = 1; it <= max_iterations; ++it) {
    std::array<std::array<double, 3>, 3> jtj{};
    std::array<double, 3> jtr{};
    normal_equations(x, r, jtj, jtr);
    const bool pinned = f_a_pinned(x[0], jtr[0]);
    bool accepted = false;
    bool tiny_step = false;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      auto damped = jtj;
      auto rhs = jtr;
      for (int a = 0; a < 3; ++a) damped[a][a] += lambda * std::max(jtj[a][a], 1e-300);
      if (pinned) pin_f_a(damped, rhs);
      std::array<double, 3> step{};
      if (!detail::solve3(damped, rhs, step)) {
        lambda *= 10.0;
        continue;
      }
      std::array<double, 3> trial = {std::clamp(x[0] + step[0], 0.0, 1.0), x[1] + step[1], x[2] + step[2]};
      tiny_step = true;
      for (int a = 0; a < 3; ++a) {
        if (std::abs(trial[a] - x[a]) > 1e-12 * (std::abs(x[a]) + 1e-12)) tiny_step = false;
      }
      const double sse_try = residuals(trial, r_try);
      if (sse_try <= sse) {
        const double drop = sse - sse_try;
        x = trial;
        r.swap(r_try);
        sse = sse_try;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (tiny_step || drop <= 1e-15 * std::max(sse, 1e-300)) converged = true;
      } else {
        if (tiny_step) {
          converged = true;
          break;
        }
        lambda *= 10.0;
      }
    }
    if (converged || !accepted) {
      converged = converged || tiny_step;
      break;
    }
  }

  out.f_a = x[0];
  out.f_b = x[1];
  out.p = detail::logistic(x[2]);
  out.iterations = std::min(it, max_iterations);
  out.residual_norm = std::sqrt(sse);
  out.converged = converged;
  out.at_boundary = out.p >= 1.0 - 1e-12 || out.p <= 1e-12;
  if (out.at_boundary) out.converged = false;
  out.epc = 0.5 * (1.0 - out.p);

  // Linearized covariance in natural parameters; a pinned f_a is treated as
  // fixed and gets no standard error.
  std::array<std::array<double, 3>, 3> jtj{};
  std::array<double, 3> jtr{};
  for (std::size_t i = 0; i < m; ++i) {
    const auto jac = decay_jacobian(n[i], out.f_a, out.f_b, out.p);
    for (int a = 0; a < 3; ++a) {
      jtr[a] += jac[a] * r[i];
      for (int b = 0; b < 3; ++b) jtj[a][b] += jac[a] * jac[b];
    }
  }
  out.f_a_at_bound = f_a_pinned(out.f_a, jtr[0]);
  if (out.f_a_at_bound) pin_f_a(jtj, jtr);
  const std::size_t free_params = out.f_a_at_bound ? 2 : 3;
  std::array<std::array<double, 3>, 3> cov{};
  if (m > free_params && detail::invert3(jtj, cov)) {
    const double s2 = sse / static_cast<double>(m - free_params);
    out.se_f_a = out.f_a_at_bound ? 0.0 : std::sqrt(std::max(0.0, s2 * cov[0][0]));
    out.se_f_b = std::sqrt(std::max(0.0, s2 * cov[1][1]));
    out.se_p = std::sqrt(std::max(0.0, s2 * cov[2][2]));
  }
  out.se_epc = 0.5 * out.se_p;
  return out;
}

inline FitResult fit_decay(const DecayCurve& curve, FitGuess guess = {}) {
  std::vector<double> n, f;
  for (const auto& pt : curve.points) {
    n.push_back(static_cast<double>(pt.n));
    f.push_back(pt.mean_fidelity);
  }
  return fit_decay(n, f, guess);
}

inline double epc(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("epc: p must lie in [0, 1]");
  return 0.5 * (1.0 - p);
}

/// Unfloored (1 - p_i / p) / 2.
inline double interleaved_error_raw(double p_i, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("interleaved_error: p must lie in (0, 1]");
  if (!(p_i >= 0.0 && p_i <= 1.0)) throw ValidationError("interleaved_error: p_i must lie in [0, 1]");
  return 0.5 * (1.0 - p_i / p);
}

/// Gate error, floored at zero for reporting.
inline double interleaved_error(double p_i, double p) { return std::max(0.0, interleaved_error_raw(p_i, p)); }

struct IrbResult {
  double p = 0.0;
  double p_i = 0.0;
  double se_p_i = 0.0;
  double eps = 0.0;      ///< floored at zero
  double eps_raw = 0.0;  ///< (1 - p_i / p) / 2 before flooring
  double se_eps = 0.0;   ///< first-order propagation of se_p and se_p_i
  double bound_e = 0.0;
  std::array<double, 2> interval{0.0, 0.0};
};

/// Half-width E = min of the depolarizing-gap term and the worst-case term.
inline double error_bound_half_width(double p_i, double p) {
  interleaved_error_raw(p_i, p);  // validates
  const double first = 0.5 * (std::abs(p - p_i / p) + (1.0 - p));
  const double second = 1.5 * (1.0 - p) / p + 4.0 * std::sqrt(3.0) * std::sqrt(1.0 - p) / p;
  return std::min(first, second);
}

inline IrbResult error_bound(double p_i, double p) {
  IrbResult r;
  r.p = p;
  r.p_i = p_i;
  r.eps_raw = interleaved_error_raw(p_i, p);
  r.eps = std::max(0.0, r.eps_raw);
  r.bound_e = error_bound_half_width(p_i, p);
  r.interval = {std::max(0.0, r.eps - r.bound_e), r.eps + r.bound_e};
  return r;
}

inline IrbResult interleaved_analysis(const FitResult& reference, const FitResult& interleaved) {
  const double p = std::clamp(reference.p, 1e-300, 1.0);
  const double p_i = std::clamp(interleaved.p, 0.0, 1.0);
  IrbResult r = error_bound(p_i, p);
  r.se_p_i = interleaved.se_p;
  const double d_pi = 0.5 / p;
  const double d_p = 0.5 * p_i / (p * p);
  r.se_eps = std::sqrt(d_pi * d_pi * interleaved.se_p * interleaved.se_p + d_p * d_p * reference.se_p * reference.se_p);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string model;
  double sigma_t_ps = 0.0;
  double sigma_j_neV = 0.0;
  FitResult fit;
  std::size_t clamped_steps = 0;
  std::string status = "ok";  ///< "ok", "not_converged" or "error: <message>"
};

/// Copy of `base` with its noise set to (sigma_t, sigma_j); 1/f noise is
/// power-matched to sigma_j with the base cutoffs.
inline RbConfig with_noise_level(const RbConfig& base, double sigma_t_ps, double sigma_j_neV) {
  RbConfig c = base;
  if (auto* q = std::get_if<QsgParams>(&c.noise)) {
    q->sigma_t_ps = sigma_t_ps;
    q->sigma_j_neV = sigma_j_neV;
  } else {
    const auto& old = std::get<OneOverFParams>(base.noise);
    auto p = OneOverFParams::matched(sigma_j_neV, sigma_t_ps, base.device.j_max_ueV, old.f_min_hz, old.f_max_hz);
    p.timing_resample = old.timing_resample;
    c.noise = p;
  }
  return c;
}

/// One campaign and fit per (sigma_t, sigma_j); points fail independently.
inline std::vector<SweepRow> sweep(const RbConfig& base, std::span<const double> sigma_t_ps,
                                   std::span<const double> sigma_j_neV, unsigned threads = 1) {
  if (sigma_t_ps.empty() || sigma_j_neV.empty()) throw ValidationError("sweep: empty grid axis");
  std::vector<SweepRow> rows;
  for (double st : sigma_t_ps) {
    for (double sj : sigma_j_neV) {
      SweepRow row;
      row.model = noise_model_name(base.noise);
      row.sigma_t_ps = st;
      row.sigma_j_neV = sj;
      try {
        const RbConfig c = with_noise_level(base, st, sj);
        const DecayCurve curve = run_campaign(c, threads);
        row.fit = fit_decay(curve);
        row.clamped_steps = curve.clamped_steps;
        if (!row.fit.converged) row.status = "not_converged";
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hqrb
