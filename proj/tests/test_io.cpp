#include <gtest/gtest.h>

#include <clocale>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "hqrb/io.hpp"

using namespace hqrb;

namespace {

std::string validation_message(const std::string& text) {
  try {
    parse_run_config_text(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

DecayCurve synthetic_curve() {
  DecayCurve c;
  for (std::size_t n : default_n_grid()) {
    const double f = 0.5 + 0.5 * std::pow(0.99, static_cast<double>(n));
    c.points.push_back({n, f, 1e-4 / (1.0 + n), 48000});
  }
  return c;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const RunConfig rc = parse_run_config_text("{}");
  const RbConfig ref;
  EXPECT_EQ(rc.rb.n_grid, ref.n_grid);
  EXPECT_EQ(rc.rb.n_seq, ref.n_seq);
  EXPECT_EQ(rc.rb.n_rep, ref.n_rep);
  EXPECT_EQ(rc.rb.seed, ref.seed);
  EXPECT_FALSE(rc.rb.interleave.has_value());
  EXPECT_DOUBLE_EQ(rc.rb.device.j_max_ueV, ref.device.j_max_ueV);
  EXPECT_DOUBLE_EQ(rc.rb.device.e_z_ueV, ref.device.e_z_ueV);
  EXPECT_EQ(rc.rb.model.kind, ModelKind::AbstractAngle);
  ASSERT_TRUE(std::holds_alternative<QsgParams>(rc.rb.noise));
  EXPECT_EQ(std::get<QsgParams>(rc.rb.noise).resample, Resample::PerGate);
}

TEST(Config, FullDocumentParses) {
  const RunConfig rc = parse_run_config_text(R"({
    "device": {"j_max_ueV": 1.0, "e_z_ueV": 0.2, "t_min_ps": 10},
    "noise": {"model": "qsg", "sigma_t_ps": 50, "sigma_j_neV": 20, "resample": "per_step"},
    "rb": {"n_grid": [1, 5, 10], "n_seq": 30, "n_rep": 4, "interleave": "h", "seed": 99},
    "model": {"kind": "two_level_hamiltonian", "coefficients": {"c_x": 0.9}},
    "sweep": {"sigma_t_ps": [10], "sigma_j_neV": [5, 15]}
  })");
  EXPECT_DOUBLE_EQ(rc.rb.device.e_z_ueV, 0.2);
  const auto& q = std::get<QsgParams>(rc.rb.noise);
  EXPECT_DOUBLE_EQ(q.sigma_t_ps, 50.0);
  EXPECT_DOUBLE_EQ(q.sigma_j_neV, 20.0);
  EXPECT_EQ(q.resample, Resample::PerStep);
  EXPECT_EQ(rc.rb.n_grid, (std::vector<std::size_t>{1, 5, 10}));
  EXPECT_EQ(rc.rb.n_seq, 30u);
  EXPECT_EQ(rc.rb.n_rep, 4u);
  EXPECT_EQ(rc.rb.interleave, InterleavedGate::H);
  EXPECT_EQ(rc.rb.seed, 99u);
  EXPECT_EQ(rc.rb.model.kind, ModelKind::TwoLevelHamiltonian);
  EXPECT_DOUBLE_EQ(rc.rb.model.coefficients.c_x, 0.9);
  EXPECT_EQ(rc.sweep_sigma_j_neV, (std::vector<double>{5.0, 15.0}));
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_NE(validation_message(R"({"bogus": 1})").find("unknown key /bogus"), std::string::npos);
  EXPECT_NE(validation_message(R"({"device": {"e_z": 0.2}})").find("unknown key /device/e_z"), std::string::npos);
  EXPECT_NE(validation_message(R"({"noise": {"foo": 1}})").find("unknown key /noise/foo"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"nseq": 1}})").find("unknown key /rb/nseq"), std::string::npos);
  EXPECT_NE(validation_message(R"({"model": {"coefficients": {"x": 1}}})").find("unknown key /model/coefficients/x"),
            std::string::npos);
  EXPECT_NE(validation_message(R"({"sweep": {"sigma": [1]}})").find("unknown key /sweep/sigma"), std::string::npos);
}

TEST(Config, TypeAndRangeErrorsNameTheirPath) {
  EXPECT_NE(validation_message(R"({"device": {"e_z_ueV": "big"}})").find("/device/e_z_ueV"), std::string::npos);
  EXPECT_NE(validation_message(R"({"device": {"j_max_ueV": 0}})").find("/device/j_max_ueV"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"n_seq": -3}})").find("/rb/n_seq"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"n_seq": 0}})").find("/rb/n_seq"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"n_grid": [5, 5]}})").find("/rb/n_grid"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"n_grid": [1, 2.5]}})").find("/rb/n_grid/1"), std::string::npos);
  EXPECT_NE(validation_message(R"({"rb": {"interleave": "y"}})").find("/rb/interleave"), std::string::npos);
  EXPECT_NE(validation_message(R"({"noise": {"model": "pink"}})").find("/noise/model"), std::string::npos);
  EXPECT_NE(validation_message(R"({"noise": {"resample": "never"}})").find("/noise/resample"), std::string::npos);
  EXPECT_NE(validation_message(R"({"noise": {"f_min_hz": 10, "f_max_hz": 5}})").find("/noise/f_max_hz"),
            std::string::npos);
  EXPECT_NE(validation_message(R"({"model": {"kind": "exact"}})").find("/model/kind"), std::string::npos);
  EXPECT_NE(validation_message(R"({"sweep": {"sigma_t_ps": [1, "a"]}})").find("/sweep/sigma_t_ps/1"),
            std::string::npos);
  EXPECT_NE(validation_message(R"({"device": 3})").find("/device must be an object"), std::string::npos);
  EXPECT_NE(validation_message(R"([1, 2])").find("/ must be an object"), std::string::npos);
}

TEST(Config, MalformedJsonIsValidationError) {
  EXPECT_NE(validation_message(R"({"rb": )").find("malformed JSON"), std::string::npos);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ValidationError);
}

TEST(Config, OneOverFStoresMatchedAmplitude) {
  const RunConfig rc =
      parse_run_config_text(R"({"noise": {"model": "one_over_f", "sigma_t_ps": 10, "sigma_j_neV": 20}})");
  ASSERT_TRUE(std::holds_alternative<OneOverFParams>(rc.rb.noise));
  const auto& p = std::get<OneOverFParams>(rc.rb.noise);
  EXPECT_DOUBLE_EQ(p.a_j_neV, calibrate_amplitude(20.0, 1.0, 50e3, 10e9));
  EXPECT_DOUBLE_EQ(p.sigma_t_ps, 10.0);
  EXPECT_DOUBLE_EQ(rc.sigma_j_neV, 20.0);
  EXPECT_DOUBLE_EQ(p.t0_ns, 0.1);
}

TEST(Config, HashIsStableAndSensitive) {
  const RunConfig a = parse_run_config_text(R"({"rb": {"seed": 5}})");
  const RunConfig b = parse_run_config_text(R"({"rb": {"seed": 5}, "device": {}})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(config_hash(a).find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(config_hash(a), config_hash(parse_run_config_text(R"({"rb": {"seed": 6}})")));
  EXPECT_NE(config_hash(a), config_hash(parse_run_config_text(R"({"rb": {"seed": 5}, "noise": {"sigma_t_ps": 1}})")));
  EXPECT_NE(config_hash(a), config_hash(parse_run_config_text(R"({"rb": {"seed": 5, "interleave": "x"}})")));
}

TEST(Config, ResolvedConfigRoundTrips) {
  const RunConfig a = parse_run_config_text(
      R"({"noise": {"model": "one_over_f", "sigma_j_neV": 30}, "rb": {"interleave": "z", "n_seq": 7}})");
  const RunConfig b = parse_run_config(resolved_config_json(a));
  EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Format, NineSignificantDigits) {
  EXPECT_EQ(fmt9(0.123456789123), "0.123456789");
  EXPECT_EQ(fmt9(1.0), "1");
  EXPECT_EQ(fmt9(123456789012.0), "1.23456789e+11");
  EXPECT_EQ(fmt9(-2.5e-7), "-2.5e-07");
  EXPECT_EQ(fmt9(std::nan("")), "nan");
}

TEST(Format, LocaleIndependent) {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") == nullptr) std::setlocale(LC_NUMERIC, "C");
  EXPECT_EQ(fmt9(0.5), "0.5");
  EXPECT_DOUBLE_EQ(parse_double("0.25", "x"), 0.25);
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(Format, ParseDoubleRejectsJunk) {
  EXPECT_THROW(parse_double("1.5x", "field"), ValidationError);
  EXPECT_THROW(parse_double("", "field"), ValidationError);
  EXPECT_DOUBLE_EQ(parse_double("-1e-3", "field"), -1e-3);
}

TEST(DecayCsv, RoundTripPreservesValuesAndProvenance) {
  RbConfig cfg;
  cfg.noise = QsgParams{10.0, 20.0, Resample::PerGate};
  const DecayCurve curve = synthetic_curve();
  const Provenance prov{"0123456789abcdef", 4242};
  const std::string text = decay_csv_header(prov) + decay_rows(cfg, curve);
  EXPECT_TRUE(text.starts_with("# hqrb decay config_hash=0123456789abcdef seed=4242\n"));
  EXPECT_NE(text.find(std::string(kDecayHeader) + "\n"), std::string::npos);

  const DecayTable t = parse_decay_csv(text);
  EXPECT_EQ(t.provenance.config_hash, prov.config_hash);
  EXPECT_EQ(t.provenance.seed, prov.seed);
  ASSERT_EQ(t.rows.size(), curve.points.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.rows[i].model, "qsg");
    EXPECT_EQ(t.rows[i].interleave, "none");
    EXPECT_DOUBLE_EQ(t.rows[i].sigma_t_ps, 10.0);
    EXPECT_DOUBLE_EQ(t.rows[i].sigma_j_neV, 20.0);
    EXPECT_EQ(t.rows[i].point.n, curve.points[i].n);
    EXPECT_EQ(t.rows[i].point.samples, curve.points[i].samples);
    EXPECT_NEAR(t.rows[i].point.mean_fidelity, curve.points[i].mean_fidelity, 1e-9);
    EXPECT_NEAR(t.rows[i].point.std_error, curve.points[i].std_error, 5e-9 * curve.points[i].std_error);
  }

  // Re-serializing the parsed values is byte-identical, so fitting the file
  // is reproducible.
  const DecayCurve reread = t.curve("none");
  EXPECT_EQ(decay_csv_header(t.provenance) + decay_rows(cfg, reread), text);
  const FitResult a = fit_decay(reread), b = fit_decay(parse_decay_csv(text).curve("none"));
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.f_a, b.f_a);
  EXPECT_NEAR(a.p, 0.99, 1e-6);
}

TEST(DecayCsv, InterleaveLabelsInFileOrder) {
  RbConfig ref;
  RbConfig il = ref;
  il.interleave = InterleavedGate::X;
  const auto curve = synthetic_curve();
  const DecayTable t = parse_decay_csv(decay_csv_header({"h", 1}) + decay_rows(ref, curve) + decay_rows(il, curve));
  EXPECT_EQ(t.interleave_labels(), (std::vector<std::string>{"none", "x"}));
  EXPECT_EQ(t.curve("x").points.size(), curve.points.size());
}

TEST(DecayCsv, ParseErrors) {
  const std::string header = std::string(kDecayHeader) + "\n";
  EXPECT_THROW(parse_decay_csv(""), ValidationError);
  EXPECT_THROW(parse_decay_csv(header), ValidationError);
  EXPECT_THROW(parse_decay_csv("model,interleave\nqsg,none\n"), ValidationError);
  EXPECT_THROW(parse_decay_csv(header + "qsg,none,0,0,1,0.9,0.01\n"), ValidationError);
  EXPECT_THROW(parse_decay_csv(header + "qsg,none,0,0,1,abc,0.01,10\n"), ValidationError);
  EXPECT_THROW(parse_decay_csv(header + "qsg,none,0,0,-1,0.9,0.01,10\n"), ValidationError);
  EXPECT_NO_THROW(parse_decay_csv(header + "qsg,none,0,0,1,0.9,0.01,10\r\n"));
}

TEST(OutputFiles, SweepCsvHeaderAndProvenance) {
  SweepRow row;
  row.model = "qsg";
  row.sigma_t_ps = 10;
  row.sigma_j_neV = 20;
  row.status = "error: a, b";
  const std::string s = sweep_csv({row}, {"abc", 3});
  EXPECT_TRUE(s.starts_with("# hqrb sweep config_hash=abc seed=3\n" + std::string(kSweepHeader) + "\n"));
  const auto last = s.substr(s.rfind(',') + 1);
  EXPECT_EQ(last, "error: a; b\n");
}

TEST(OutputFiles, TraceAndPeriodogramHeaders) {
  const std::vector<double> trace = {1.0, -2.0, 3.5};
  const std::string t = trace_csv(trace, 0.1, {"abc", 3});
  EXPECT_EQ(t, "# hqrb noise_trace config_hash=abc seed=3\nt_ns,value_neV\n0,1\n0.1,-2\n0.2,3.5\n");
  const std::vector<PsdBin> bins = {{1e6, 2.0}, {2e6, 1.0}};
  const std::string p = psd_csv(bins, {"abc", 3});
  EXPECT_EQ(p, "# hqrb periodogram config_hash=abc seed=3\nf_hz,psd\n1000000,2\n2000000,1\n");
}

TEST(OutputFiles, FitJsonCarriesRequiredKeys) {
  const FitResult f = fit_decay(synthetic_curve());
  const auto j = nlohmann::json::parse(fit_json(f, {"abc", 3}));
  for (const char* k : {"f_a", "f_b", "p", "se_f_a", "se_f_b", "se_p", "epc", "se_epc"}) {
    ASSERT_TRUE(j.contains(k)) << k;
    EXPECT_TRUE(j[k].is_number()) << k;
  }
  EXPECT_TRUE(j["converged"].is_boolean());
  EXPECT_EQ(j["provenance"]["config_hash"], "abc");
  EXPECT_EQ(j["provenance"]["seed"], 3);
  EXPECT_NEAR(j["p"].get<double>(), 0.99, 1e-6);
}

TEST(OutputFiles, IrbJsonCarriesRequiredKeys) {
  const FitResult ref = fit_decay(synthetic_curve());
  DecayCurve il = synthetic_curve();
  for (auto& pt : il.points) pt.mean_fidelity = 0.5 + 0.5 * std::pow(0.985, static_cast<double>(pt.n));
  const FitResult fi = fit_decay(il);
  const auto j = nlohmann::json::parse(irb_json(ref, fi, "x", {"abc", 3}));
  for (const char* k : {"f_a", "f_b", "p", "se_f_a", "se_f_b", "se_p", "epc", "se_epc", "p_i", "eps", "bound_e"}) {
    ASSERT_TRUE(j.contains(k)) << k;
    EXPECT_TRUE(j[k].is_number()) << k;
  }
  EXPECT_TRUE(j["converged"].is_boolean());
  ASSERT_TRUE(j["interval"].is_array());
  ASSERT_EQ(j["interval"].size(), 2u);
  EXPECT_LE(j["interval"][0].get<double>(), j["interval"][1].get<double>());
  EXPECT_EQ(j["gate"], "x");
  const IrbResult r = interleaved_analysis(ref, fi);
  EXPECT_NEAR(j["eps"].get<double>(), r.eps, 1e-9);
}

TEST(OutputFiles, CalibrationJsonValidates) {
  const DeviceParams dp;
  const auto rep = calibrate(dp, HamiltonianCoefficients{}, default_theta_grid(32), ModelKind::AbstractAngle);
  const std::string text = calibration_json(rep, dp, {"abc", 3});
  EXPECT_EQ(validate_calibration_json(text), "");

  auto j = nlohmann::json::parse(text);
  j["exactness"].erase("certified");
  EXPECT_EQ(validate_calibration_json(j.dump()), "missing /exactness/certified");
  j = nlohmann::json::parse(text);
  j["gate_times"]["rows"] = nlohmann::json::array();
  EXPECT_NE(validate_calibration_json(j.dump()), "");
  EXPECT_NE(validate_calibration_json("{"), "");
}

TEST(OutputFiles, WriteFileFailsOnBadPath) {
  EXPECT_THROW(write_file("/nonexistent/dir/file.txt", "x"), std::runtime_error);
}
