#include "doctest.h"

#include <filesystem>
#include <string>

#include "qdstrain/config.hpp"
#include "qdstrain/errors.hpp"
#include "qdstrain/io.hpp"
#include "qdstrain/report.hpp"

using namespace qdstrain;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "qdstrain_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("CsvTable: comments, blank lines and line numbers") {
  const auto t = io::CsvTable::parse("# note\na,b\n\n1,2\n# skipped\n3,x\n", "mem");
  CHECK(t.rows() == 2);
  CHECK(t.line(1) == 6);
  CHECK(t.number(0, t.column("b")) == 2.0);
  const auto msg = error_of([&] { (void)t.number(1, 1); });
  CHECK(msg.find("line 6") != std::string::npos);
  CHECK_THROWS_AS((void)t.column("zzz"), InvalidInput);
}

TEST_CASE("spectrum CSV round trip with sidecar metadata") {
  const auto dir = scratch("spectrum");
  Eigen::VectorXd e(4), y(4);
  e << 2000.0, 2000.125, 2000.25, 2000.375;
  y << 1.0, 5.5, 2.25, 0.0;
  SpectrumMeta meta;
  meta.temperature_K = 4.0;
  meta.location_id = "L7";
  meta.sample = "S1";
  meta.material = "WS2";
  meta.piezo_field_kV_cm = 7.5;
  io::write_spectrum_csv(dir / "a.csv", Spectrum(e, y, meta));
  CHECK(fs::exists(dir / "a.meta.json"));

  const auto back = io::read_spectrum_csv(dir / "a.csv");
  REQUIRE(back.size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(back.energy()[i] == doctest::Approx(e[i]).epsilon(1e-12));
    CHECK(back.intensity()[i] == doctest::Approx(y[i]));
  }
  CHECK(back.meta().location_id == "L7");
  CHECK(back.meta().sample == "S1");
  CHECK(back.meta().temperature_K == 4.0);
  CHECK(back.meta().piezo_field_kV_cm == 7.5);
}

TEST_CASE("spectrum CSV: non-monotone grid names the offending line") {
  const auto dir = scratch("monotone");
  io::write_text_file(dir / "bad.csv", "energy_meV,intensity\n2000,1\n2001,2\n2000.5,3\n2002,4\n");
  const auto msg = error_of([&] { (void)io::read_spectrum_csv(dir / "bad.csv"); });
  CHECK(msg.find("line 4") != std::string::npos);
  CHECK(msg.find("strictly increasing") != std::string::npos);

  io::write_text_file(dir / "hdr.csv", "energy,intensity\n1,2\n3,4\n");
  CHECK_THROWS_AS((void)io::read_spectrum_csv(dir / "hdr.csv"), InvalidInput);
  CHECK_THROWS_AS((void)io::read_spectrum_csv(dir / "missing.csv"), IoError);
}

TEST_CASE("spectrum CSV: wavelength header converts to an increasing energy grid") {
  const auto dir = scratch("wavelength");
  io::write_text_file(dir / "w.csv", "wavelength_nm,intensity\n600,1\n610,2\n620,3\n");
  const auto s = io::read_spectrum_csv(dir / "w.csv");
  REQUIRE(s.size() == 3);
  CHECK(s.energy()[0] == doctest::Approx(1239841.98 / 620.0));
  CHECK(s.energy()[2] == doctest::Approx(1239841.98 / 600.0));
  CHECK(s.intensity()[0] == doctest::Approx(3.0));
}

TEST_CASE("spectrum JSON: single object and array forms") {
  const auto dir = scratch("json");
  io::write_text_file(dir / "one.json",
                      R"({"energy_meV": [1, 2, 3], "intensity": [0, 1, 0], "meta": {"sample": "S9"}})");
  const auto one = io::read_spectra(dir / "one.json");
  REQUIRE(one.size() == 1);
  CHECK(one[0].meta().sample == "S9");

  Eigen::VectorXd e(3), y(3);
  e << 10, 11, 12;
  y << 3, 4, 5;
  nlohmann::json arr = nlohmann::json::array({io::spectrum_to_json(Spectrum(e, y)), io::spectrum_to_json(Spectrum(e, y))});
  io::write_text_file(dir / "many.json", arr.dump());
  const auto many = io::read_spectra(dir / "many.json");
  REQUIRE(many.size() == 2);
  CHECK(many[1].intensity()[2] == 5.0);
}

TEST_CASE("peak, temperature, energy, strain and shift tables round trip") {
  const auto dir = scratch("tables");

  PeakFit f;
  f.center = 2067.12345678;
  f.sigma = 1.5;
  f.amplitude = 900.0;
  f.baseline = 10.0;
  f.covariance = Eigen::Matrix3d::Identity() * 1e-4;
  SpectrumMeta meta;
  meta.sample = "S1";
  meta.material = "WS2";
  meta.location_id = "L1";
  meta.temperature_K = 296.0;
  io::write_peak_csv(dir / "peaks.csv", {{"spec", 0, Species::x0, f, meta}});
  const auto peaks = io::read_peak_csv(dir / "peaks.csv");
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].species == Species::x0);
  CHECK(peaks[0].fit.center == doctest::Approx(2067.1235).epsilon(1e-12));
  CHECK(peaks[0].meta.location_id == "L1");
  CHECK(peaks[0].fit.center_error() == doctest::Approx(0.01).epsilon(1e-6));

  const std::vector<std::pair<std::string, std::vector<TemperaturePoint>>> series = {
      {"QD2", {{4.0, 1900.0, 0.1}, {10.0, 1899.9, 0.1}}}, {"QD1", {{4.0, 1950.0, 0.2}}}};
  io::write_temperature_csv(dir / "t.csv", series);
  const auto t = io::read_temperature_csv(dir / "t.csv");
  REQUIRE(t.size() == 2);
  CHECK(t[0].first == "QD2");
  CHECK(t[0].second.size() == 2);
  CHECK(t[1].second[0].E_err == doctest::Approx(0.2));

  io::write_qd_energies(dir / "e.csv", {{"S1", "WS2", "L1", 1950.5}});
  CHECK(io::read_qd_energies(dir / "e.csv")[0].energy == doctest::Approx(1950.5));

  io::write_strain_table(dir / "s.csv", {{"S1", "WS2", 0.42, 0.05}});
  const auto st = io::read_strain_table(dir / "s.csv");
  CHECK(st[0].strain == doctest::Approx(0.42));
  CHECK(st[0].strain_err == doctest::Approx(0.05));

  ShiftMeasurement with_weight{1.5, 0.1, 2.0, "L1"};
  ShiftMeasurement without{-0.5, 0.1, std::nullopt, "L2"};
  io::write_shift_table(dir / "p.csv", {{15.0, Species::qd, with_weight}, {15.0, Species::x0, without}});
  const auto p = io::read_shift_table(dir / "p.csv");
  REQUIRE(p.size() == 2);
  CHECK(p[0].shift.weight == 2.0);
  CHECK_FALSE(p[1].shift.weight.has_value());
  CHECK(p[1].species == Species::x0);
  CHECK(p[1].shift.context == "L2");
}

TEST_CASE("config: shipped file parses; unknown keys and bad values rejected") {
  const auto cfg = load_config(QDSTRAIN_CONFIG_PATH);
  REQUIRE(cfg.materials.count("WS2"));
  CHECK(cfg.material("WS2").gauge_qd->value == doctest::Approx(-149.0));
  CHECK(cfg.material("WSe2").gauge_qd->value == doctest::Approx(-275.0));
  CHECK(cfg.relaxation_pct == doctest::Approx(-0.28));
  CHECK(cfg.hash.size() == 16);

  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"histogram": {"bin_size": 20}})")), InvalidInput);
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"histogram": {"bin_size_meV": -1}})")), InvalidInput);
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"materials": {"X": {"gauge": {"QD": {"value": 0}}}}})")),
                  InvalidInput);
  CHECK_THROWS_AS((void)cfg.material("MoS2"), InvalidInput);
  const auto a = parse_config(nlohmann::json::parse(R"({"seed": 3})"));
  const auto b = parse_config(nlohmann::json::parse(R"({"seed": 4})"));
  CHECK(a.hash != b.hash);
}

TEST_CASE("report: round trip and stable serialisation") {
  const auto dir = scratch("report");
  io::write_text_file(dir / "in.txt", "abc");
  Report r;
  r.config_hash = "0123456789abcdef";
  r.add_input(dir / "in.txt");
  r.stages["x"] = {{"value", 1.5}};
  r.save(dir / "r.json");
  const auto back = Report::load(dir / "r.json");
  CHECK(back.config_hash == r.config_hash);
  REQUIRE(back.inputs.size() == 1);
  CHECK(back.inputs[0].digest == file_digest(dir / "in.txt"));
  CHECK(back.to_json() == r.to_json());
  CHECK(back.to_json().at("version") == kToolVersion);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}
