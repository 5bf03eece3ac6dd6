#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so
// tests can drive it in-process.
//
// Exit status: 0 success, 2 validation error (bad flags, config or input
// file), 1 runtime failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hqrb/analysis.hpp"
#include "hqrb/clifford.hpp"
#include "hqrb/device.hpp"
#include "hqrb/io.hpp"
#include "hqrb/noise.hpp"
#include "hqrb/pulse.hpp"
#include "hqrb/rb.hpp"

namespace hqrb {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

namespace detail {

inline RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    RunConfig rc;
    rc.rb.validate();
    return rc;
  }
  return load_run_config(path);
}

inline void apply_overrides(RunConfig& rc, const std::optional<std::uint64_t>& seed) {
  if (seed) rc.rb.seed = *seed;
}

inline std::string schedule_table(const GateSchedule& g) {
  std::string s = "# " + g.label + " total_ns=" + fmt9(g.duration()) + "\n";
  s += "step,j1_ueV,j2_ueV,j_ueV,duration_ns\n";
  char buf[160];
  for (std::size_t i = 0; i < g.steps.size(); ++i) {
    const auto& st = g.steps[i];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", i, st.j1, st.j2, st.j, st.duration_ns);
    s += buf;
  }
  return s;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

inline std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid-qubit randomized-benchmarking simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // synth
  std::string synth_gate = "rx";
  double theta = 0.0, phi = 0.0, lambda = 0.0;
  std::string synth_config;
  std::optional<double> synth_ez, synth_jmax;
  auto* synth = app.add_subcommand("synth", "Print the pulse schedule of one gate");
  synth->add_option("--gate", synth_gate, "rx, rz, ry, u or h")
      ->check(CLI::IsMember({"rx", "rz", "ry", "u", "h"}));
  synth->add_option("--theta", theta, "Rotation angle (rad)");
  synth->add_option("--phi", phi, "U gate phi (rad)");
  synth->add_option("--lambda", lambda, "U gate lambda (rad)");
  synth->add_option("--config", synth_config, "Config file for device parameters");
  synth->add_option("--e-z", synth_ez, "Zeeman energy (ueV)");
  synth->add_option("--j-max", synth_jmax, "Maximum exchange (ueV)");

  // run
  std::string run_config, run_out;
  unsigned run_threads = 1;
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run an RB (or RB + IRB) campaign and fit it");
  run->add_option("--config", run_config, "Config file")->required();
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--threads", run_threads, "Worker threads (0 = all cores); does not change results");
  run->add_option("--seed", run_seed, "Override rb.seed");

  // fit
  std::string fit_input, fit_out;
  auto* fit = app.add_subcommand("fit", "Fit an existing decay CSV");
  fit->add_option("decay_csv", fit_input, "Decay CSV written by run")->required();
  fit->add_option("--out", fit_out, "Write JSON here instead of stdout");

  // sweep
  std::string sweep_config, sweep_out;
  unsigned sweep_threads = 1;
  std::optional<std::uint64_t> sweep_seed;
  auto* sw = app.add_subcommand("sweep", "EPC over a sigma_t x sigma_j grid");
  sw->add_option("--config", sweep_config, "Config file")->required();
  sw->add_option("--out", sweep_out, "Output CSV")->required();
  sw->add_option("--threads", sweep_threads, "Worker threads (0 = all cores); does not change results");
  sw->add_option("--seed", sweep_seed, "Override rb.seed");

  // noise-check
  std::string nc_config, nc_out;
  std::optional<double> nc_sigma_j;
  std::size_t nc_segment = 16384;
  std::optional<std::uint64_t> nc_seed;
  auto* nc = app.add_subcommand("noise-check", "Write one 1/f trace and its periodogram");
  nc->add_option("--config", nc_config, "Config file for cutoffs and sigma_j");
  nc->add_option("--sigma-j", nc_sigma_j, "Matched sigma_j (neV)");
  nc->add_option("--segment", nc_segment, "Welch segment length (samples)");
  nc->add_option("--out", nc_out, "Output directory")->required();
  nc->add_option("--seed", nc_seed, "Override rb.seed");

  // calibrate-ez
  std::string cal_config, cal_out, cal_model;
  std::size_t cal_grid = 64;
  std::optional<std::uint64_t> cal_seed;
  auto* cal = app.add_subcommand("calibrate-ez", "Calibrate the device model and fit E_z to reference gate times");
  cal->add_option("--config", cal_config, "Config file for device and model");
  cal->add_option("--model", cal_model, "abstract_angle or two_level_hamiltonian (default: config)")
      ->check(CLI::IsMember({"abstract_angle", "two_level_hamiltonian"}));
  cal->add_option("--grid", cal_grid, "Number of calibration angles (>= 32)");
  cal->add_option("--out", cal_out, "Write JSON here instead of stdout");
  cal->add_option("--seed", cal_seed, "Override rb.seed (recorded only)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (synth->parsed()) {
      DeviceParams dp = detail::config_or_default(synth_config).rb.device;
      if (synth_ez) dp.e_z_ueV = *synth_ez;
      if (synth_jmax) dp.j_max_ueV = *synth_jmax;
      GateSchedule g;
      if (synth_gate == "rx") g = synth_rx(theta, dp);
      else if (synth_gate == "rz") g = synth_rz(theta, dp);
      else if (synth_gate == "ry") g = synth_y(theta, dp);
      else if (synth_gate == "u") g = synth_u(phi, theta, lambda, dp);
      else g = synth_hadamard(dp);
      out << detail::schedule_table(g);
      for (std::size_t i : short_steps(g, dp)) {
        err << "warning: step " << i << " is shorter than t_min (" << fmt9(dp.t_min_ps) << " ps)\n";
      }
      return kExitOk;
    }

    if (run->parsed()) {
      RunConfig rc = load_run_config(run_config);
      detail::apply_overrides(rc, run_seed);
      const Provenance prov = provenance_of(rc);
      detail::ensure_dir(run_out);

      RbConfig reference = rc.rb;
      reference.interleave.reset();
      const DecayCurve ref_curve = run_campaign(reference, run_threads);
      std::string csv = decay_csv_header(prov) + decay_rows(reference, ref_curve);
      std::size_t clamped = ref_curve.clamped_steps;
      if (rc.rb.interleave) {
        const DecayCurve il_curve = run_campaign(rc.rb, run_threads);
        csv += decay_rows(rc.rb, il_curve);
        clamped += il_curve.clamped_steps;
      }

      // Fit the values exactly as written, so `fit decay.csv` reproduces
      // these results bit for bit.
      const DecayTable table = parse_decay_csv(csv);
      const FitResult ref_fit = fit_decay(table.curve("none"));
      if (rc.rb.interleave) {
        const char* label = interleave_name(rc.rb.interleave);
        const FitResult il_fit = fit_decay(table.curve(label));
        write_file(detail::join(run_out, "irb.json"), irb_json(ref_fit, il_fit, label, prov));
      }
      write_file(detail::join(run_out, "decay.csv"), csv);
      write_file(detail::join(run_out, "fit.json"), fit_json(ref_fit, prov));
      out << "p=" << fmt9(ref_fit.p) << " epc=" << fmt9(ref_fit.epc) << " clamped_steps=" << clamped << "\n";
      return kExitOk;
    }

    if (fit->parsed()) {
      const DecayTable table = parse_decay_csv(read_file(fit_input));
      const auto labels = table.interleave_labels();
      std::string json;
      if (labels.size() == 1) {
        json = fit_json(fit_decay(table.curve(labels[0])), table.provenance);
      } else if (labels.size() == 2 && labels[0] == "none") {
        json = irb_json(fit_decay(table.curve("none")), fit_decay(table.curve(labels[1])), labels[1], table.provenance);
      } else {
        throw ValidationError("decay csv: expected one curve, or a reference curve ('none') plus one interleaved curve");
      }
      if (fit_out.empty()) {
        out << json;
      } else {
        write_file(fit_out, json);
      }
      return kExitOk;
    }

    if (sw->parsed()) {
      RunConfig rc = load_run_config(sweep_config);
      detail::apply_overrides(rc, sweep_seed);
      const auto rows = sweep(rc.rb, rc.sweep_sigma_t_ps, rc.sweep_sigma_j_neV, sweep_threads);
      write_file(sweep_out, sweep_csv(rows, provenance_of(rc)));
      bool all_ok = true;
      for (const auto& r : rows) {
        if (r.status.starts_with("error")) {
          all_ok = false;
          err << "grid point sigma_t=" << fmt9(r.sigma_t_ps) << " sigma_j=" << fmt9(r.sigma_j_neV) << ": " << r.status
              << "\n";
        }
      }
      return all_ok ? kExitOk : kExitRuntime;
    }

    if (nc->parsed()) {
      RunConfig rc = detail::config_or_default(nc_config);
      detail::apply_overrides(rc, nc_seed);
      double f_min = 50e3, f_max = 10e9;
      if (const auto* p = std::get_if<OneOverFParams>(&rc.rb.noise)) {
        f_min = p->f_min_hz;
        f_max = p->f_max_hz;
      }
      const double sigma_j = nc_sigma_j.value_or(rc.sigma_j_neV > 0.0 ? rc.sigma_j_neV : 10.0);
      if (!(sigma_j >= 0.0)) throw ValidationError("--sigma-j must be non-negative");
      const auto params = OneOverFParams::matched(sigma_j, 0.0, rc.rb.device.j_max_ueV, f_min, f_max);
      Rng rng = make_stream(rc.rb.seed, {0x6e6f697365ULL});
      const auto trace = generate_1f_full(params, rng);
      if (nc_segment < 8 || nc_segment > trace.size()) {
        throw ValidationError("--segment must lie in [8, " + std::to_string(trace.size()) + "]");
      }
      const auto psd = welch_psd(trace, params.t0_ns, nc_segment);
      const Provenance prov = provenance_of(rc);
      detail::ensure_dir(nc_out);
      write_file(detail::join(nc_out, "trace.csv"), trace_csv(trace, params.t0_ns, prov));
      write_file(detail::join(nc_out, "psd.csv"), psd_csv(psd, prov));
      out << "a_j_neV=" << fmt9(params.a_j_neV) << " samples=" << trace.size() << "\n";
      return kExitOk;
    }

    if (cal->parsed()) {
      RunConfig rc = detail::config_or_default(cal_config);
      detail::apply_overrides(rc, cal_seed);
      const ModelKind kind = cal_model.empty() ? rc.rb.model.kind : parse_model_kind(cal_model);
      const auto grid = default_theta_grid(cal_grid);
      const auto report = calibrate(rc.rb.device, rc.rb.model.coefficients, grid, kind);
      const std::string json = calibration_json(report, rc.rb.device, provenance_of(rc));
      if (cal_out.empty()) {
        out << json;
      } else {
        write_file(cal_out, json);
      }
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace hqrb
