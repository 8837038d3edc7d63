#include "qdstrain/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qdstrain/errors.hpp"

namespace qdstrain::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_bool(const std::string& s) { return s == "1" || s == "true"; }

std::string csv_field(const std::string& s) {
  if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos) {
    throw InvalidInput("csv: field contains a separator: '" + s + "'");
  }
  return s;
}

}  // namespace

CsvTable CsvTable::parse(std::string_view text, std::string source) {
  CsvTable t;
  t.source_ = std::move(source);
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line);
    if (t.header_.empty()) {
      t.header_ = std::move(fields);
      continue;
    }
    if (fields.size() != t.header_.size()) {
      throw InvalidInput(t.source_ + ": line " + std::to_string(line_no) + ": expected " +
                         std::to_string(t.header_.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(line_no);
  }
  if (t.header_.empty()) throw InvalidInput(t.source_ + ": missing header row");
  return t;
}

CsvTable CsvTable::read(const fs::path& path) { return parse(read_text_file(path), path.string()); }

std::optional<std::size_t> CsvTable::find(std::string_view column) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == column) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view column) const {
  if (auto i = find(column)) return *i;
  throw InvalidInput(source_ + ": line 1: missing column '" + std::string(column) + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(row, "column '" + header_[col] + "': not a finite number: '" + s + "'");
  }
  return v;
}

void CsvTable::fail(std::size_t row, const std::string& what) const {
  throw InvalidInput(source_ + ": line " + std::to_string(lines_[row]) + ": " + what);
}

std::string format_energy(double meV) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", meV);
  return buf;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json meta_to_json(const SpectrumMeta& meta) {
  json j;
  j["temperature_K"] = meta.temperature_K;
  j["location_id"] = meta.location_id;
  j["sample"] = meta.sample;
  j["material"] = meta.material;
  j["piezo_field_kV_cm"] = meta.piezo_field_kV_cm ? json(*meta.piezo_field_kV_cm) : json(nullptr);
  j["resolution_meV"] = meta.resolution_meV ? json(*meta.resolution_meV) : json(nullptr);
  return j;
}

SpectrumMeta meta_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("spectrum metadata must be a JSON object");
  SpectrumMeta m;
  m.temperature_K = j.value("temperature_K", 0.0);
  m.location_id = j.value("location_id", std::string{});
  m.sample = j.value("sample", std::string{});
  m.material = j.value("material", std::string{});
  if (j.contains("piezo_field_kV_cm") && !j["piezo_field_kV_cm"].is_null()) {
    m.piezo_field_kV_cm = j["piezo_field_kV_cm"].get<double>();
  }
  if (j.contains("resolution_meV") && !j["resolution_meV"].is_null()) m.resolution_meV = j["resolution_meV"].get<double>();
  if (m.temperature_K < 0.0) throw InvalidInput("spectrum metadata: negative temperature");
  return m;
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".meta.json");
  return p;
}

Spectrum read_spectrum_csv(const fs::path& path) {
  const auto t = CsvTable::read(path);
  if (t.header().size() != 2 || t.header()[1] != "intensity" ||
      (t.header()[0] != "energy_meV" && t.header()[0] != "wavelength_nm")) {
    throw InvalidInput(path.string() + ": line 1: header must be 'energy_meV,intensity' or 'wavelength_nm,intensity'");
  }
  const bool wavelength = t.header()[0] == "wavelength_nm";
  if (t.rows() < 2) throw InvalidInput(path.string() + ": need at least 2 data rows");
  Eigen::VectorXd x(static_cast<Eigen::Index>(t.rows())), y(x.size());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    x[i] = t.number(r, 0);
    y[i] = t.number(r, 1);
    if (y[i] < 0.0) t.fail(r, "negative intensity");
    if (wavelength && !(x[i] > 0.0)) t.fail(r, "non-positive wavelength");
    if (r > 0 && !(x[i] > x[i - 1])) t.fail(r, t.header()[0] + " is not strictly increasing");
  }
  SpectrumMeta meta;
  const auto side = sidecar_path(path);
  if (fs::exists(side)) {
    try {
      meta = meta_from_json(json::parse(read_text_file(side)));
    } catch (const json::exception& e) {
      throw InvalidInput(side.string() + ": " + e.what());
    }
  }
  return wavelength ? Spectrum::from_wavelength(x, y, std::move(meta)) : Spectrum(x, y, std::move(meta));
}

void write_spectrum_csv(const fs::path& path, const Spectrum& spectrum) {
  std::string out = "energy_meV,intensity\n";
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    out += format_energy(spectrum.energy()[i]) + "," + format_number(spectrum.intensity()[i]) + "\n";
  }
  write_text_file(path, out);
  write_text_file(sidecar_path(path), meta_to_json(spectrum.meta()).dump(2) + "\n");
}

json spectrum_to_json(const Spectrum& spectrum) {
  json j;
  j["meta"] = meta_to_json(spectrum.meta());
  j["energy_meV"] = std::vector<double>(spectrum.energy().begin(), spectrum.energy().end());
  j["intensity"] = std::vector<double>(spectrum.intensity().begin(), spectrum.intensity().end());
  return j;
}

std::vector<Spectrum> read_spectrum_json(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  auto one = [&](const json& j, std::size_t index) {
    const std::string where = path.string() + ": spectrum " + std::to_string(index) + ": ";
    try {
      if (!j.is_object() || !j.contains("intensity")) throw InvalidInput(where + "missing 'intensity'");
      const auto y = j["intensity"].get<std::vector<double>>();
      const bool wl = j.contains("wavelength_nm");
      if (!wl && !j.contains("energy_meV")) throw InvalidInput(where + "missing 'energy_meV' or 'wavelength_nm'");
      const auto x = j[wl ? "wavelength_nm" : "energy_meV"].get<std::vector<double>>();
      const SpectrumMeta meta = j.contains("meta") ? meta_from_json(j["meta"]) : SpectrumMeta{};
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
      return wl ? Spectrum::from_wavelength(xv, yv, meta) : Spectrum(xv, yv, meta);
    } catch (const json::exception& e) {
      throw InvalidInput(where + e.what());
    } catch (const InvalidInput& e) {
      const std::string msg = e.what();
      throw InvalidInput(msg.rfind(path.string(), 0) == 0 ? msg : where + msg);
    }
  };
  std::vector<Spectrum> out;
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(one(doc[i], i));
  } else {
    out.push_back(one(doc, 0));
  }
  return out;
}

std::vector<Spectrum> read_spectra(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return {read_spectrum_csv(path)};
  if (ext == ".json") return read_spectrum_json(path);
  throw InvalidInput(path.string() + ": unsupported spectrum format (expected .csv or .json)");
}

namespace {

const char* kPeakHeader =
    "spectrum,peak,species,location_id,sample,material,temperature_K,shape,center_meV,center_err_meV,sigma_meV,"
    "sigma_err_meV,fwhm_meV,amplitude,amplitude_err,baseline,baseline_err,residual_norm,converged,sigma_at_floor";

}  // namespace

void write_peak_csv(const fs::path& path, const std::vector<PeakRow>& rows) {
  std::string out = std::string(kPeakHeader) + "\n";
  for (const auto& r : rows) {
    const auto& f = r.fit;
    out += csv_field(r.spectrum) + "," + std::to_string(r.peak) + "," + to_string(r.species) + "," +
           csv_field(r.meta.location_id) + "," + csv_field(r.meta.sample) + "," + csv_field(r.meta.material) + "," +
           format_number(r.meta.temperature_K) + "," + std::string(to_string(f.shape)) + "," +
           format_energy(f.center) + "," + format_energy(f.center_error()) + "," + format_energy(f.sigma) + "," +
           format_energy(f.sigma_error()) + "," + format_energy(f.fwhm()) + "," + format_number(f.amplitude) + "," +
           format_number(f.amplitude_error()) + "," + format_number(f.baseline) + "," +
           format_number(f.baseline_error) + "," + format_number(f.residual_norm) + "," +
           (f.converged ? "1" : "0") + "," + (f.sigma_at_floor ? "1" : "0") + "\n";
  }
  write_text_file(path, out);
}

std::vector<PeakRow> read_peak_csv(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_spec = t.column("spectrum"), c_peak = t.column("peak"), c_species = t.column("species"),
             c_loc = t.column("location_id"), c_sample = t.column("sample"), c_mat = t.column("material"),
             c_center = t.column("center_meV"), c_center_err = t.column("center_err_meV");
  const auto c_temp = t.find("temperature_K"), c_shape = t.find("shape"), c_sigma = t.find("sigma_meV"),
             c_sigma_err = t.find("sigma_err_meV"), c_amp = t.find("amplitude"), c_amp_err = t.find("amplitude_err"),
             c_base = t.find("baseline"), c_base_err = t.find("baseline_err"), c_res = t.find("residual_norm"),
             c_conv = t.find("converged"), c_floor = t.find("sigma_at_floor");
  std::vector<PeakRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    PeakRow row;
    row.spectrum = t.text(r, c_spec);
    row.peak = static_cast<std::size_t>(t.number(r, c_peak));
    try {
      row.species = species_from_string(t.text(r, c_species));
      if (c_shape) row.fit.shape = line_shape_from_string(t.text(r, *c_shape));
    } catch (const InvalidInput& e) {
      t.fail(r, e.what());
    }
    row.meta.location_id = t.text(r, c_loc);
    row.meta.sample = t.text(r, c_sample);
    row.meta.material = t.text(r, c_mat);
    if (c_temp) row.meta.temperature_K = t.number(r, *c_temp);
    row.fit.center = t.number(r, c_center);
    const double ce = t.number(r, c_center_err);
    if (ce < 0.0) t.fail(r, "negative center error");
    row.fit.covariance(0, 0) = ce * ce;
    if (c_sigma) row.fit.sigma = t.number(r, *c_sigma);
    if (c_sigma_err) row.fit.covariance(1, 1) = std::pow(t.number(r, *c_sigma_err), 2);
    if (c_amp) row.fit.amplitude = t.number(r, *c_amp);
    if (c_amp_err) row.fit.covariance(2, 2) = std::pow(t.number(r, *c_amp_err), 2);
    if (c_base) row.fit.baseline = t.number(r, *c_base);
    if (c_base_err) row.fit.baseline_error = t.number(r, *c_base_err);
    if (c_res) row.fit.residual_norm = t.number(r, *c_res);
    if (c_conv) row.fit.converged = parse_bool(t.text(r, *c_conv));
    if (c_floor) row.fit.sigma_at_floor = parse_bool(t.text(r, *c_floor));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::pair<std::string, std::vector<TemperaturePoint>>> read_temperature_csv(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_em = t.column("emitter"), c_t = t.column("T_K"), c_e = t.column("E_meV");
  const auto c_err = t.find("E_err_meV");
  std::vector<std::pair<std::string, std::vector<TemperaturePoint>>> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    TemperaturePoint p{t.number(r, c_t), t.number(r, c_e), c_err ? t.number(r, *c_err) : 0.0};
    if (p.T < 0.0) t.fail(r, "negative temperature");
    if (p.E_err < 0.0) t.fail(r, "negative energy error");
    const std::string& name = t.text(r, c_em);
    if (name.empty()) t.fail(r, "empty emitter tag");
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == name; });
    if (it == out.end()) {
      out.push_back({name, {}});
      it = out.end() - 1;
    }
    it->second.push_back(p);
  }
  return out;
}

void write_temperature_csv(const fs::path& path,
                           const std::vector<std::pair<std::string, std::vector<TemperaturePoint>>>& series) {
  std::string out = "emitter,T_K,E_meV,E_err_meV\n";
  for (const auto& [name, points] : series) {
    for (const auto& p : points) {
      out += csv_field(name) + "," + format_number(p.T) + "," + format_energy(p.E) + "," + format_energy(p.E_err) + "\n";
    }
  }
  write_text_file(path, out);
}

std::vector<QdEnergyRow> read_qd_energies(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_sample = t.column("sample"), c_e = t.column("energy_meV");
  const auto c_mat = t.find("material"), c_loc = t.find("location_id");
  std::vector<QdEnergyRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    QdEnergyRow row;
    row.sample = t.text(r, c_sample);
    if (row.sample.empty()) t.fail(r, "empty sample tag");
    row.energy = t.number(r, c_e);
    if (!(row.energy > 0.0)) t.fail(r, "energy must be > 0");
    if (c_mat) row.material = t.text(r, *c_mat);
    if (c_loc) row.location_id = t.text(r, *c_loc);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_qd_energies(const fs::path& path, const std::vector<QdEnergyRow>& rows) {
  std::string out = "sample,material,location_id,energy_meV\n";
  for (const auto& r : rows) {
    out += csv_field(r.sample) + "," + csv_field(r.material) + "," + csv_field(r.location_id) + "," +
           format_energy(r.energy) + "\n";
  }
  write_text_file(path, out);
}

std::vector<StrainRow> read_strain_table(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_sample = t.column("sample"), c_mat = t.column("material"), c_s = t.column("strain_pct"),
             c_err = t.column("strain_err_pct");
  std::vector<StrainRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    StrainRow row{t.text(r, c_sample), t.text(r, c_mat), t.number(r, c_s), t.number(r, c_err)};
    if (row.strain_err < 0.0) t.fail(r, "negative strain error");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_strain_table(const fs::path& path, const std::vector<StrainRow>& rows) {
  std::string out = "sample,material,strain_pct,strain_err_pct\n";
  for (const auto& r : rows) {
    out += csv_field(r.sample) + "," + csv_field(r.material) + "," + format_number(r.strain) + "," +
           format_number(r.strain_err) + "\n";
  }
  write_text_file(path, out);
}

std::vector<ShiftRow> read_shift_table(const fs::path& path) {
  const auto t = CsvTable::read(path);
  const auto c_f = t.column("field_kV_cm"), c_sp = t.column("species"), c_loc = t.column("location_id"),
             c_de = t.column("delta_E_meV"), c_err = t.column("delta_E_err_meV");
  const auto c_w = t.find("weight");
  std::vector<ShiftRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    ShiftRow row;
    row.field_kV_cm = t.number(r, c_f);
    try {
      row.species = species_from_string(t.text(r, c_sp));
    } catch (const InvalidInput& e) {
      t.fail(r, e.what());
    }
    row.shift.context = t.text(r, c_loc);
    row.shift.delta_E = t.number(r, c_de);
    row.shift.delta_E_err = t.number(r, c_err);
    if (c_w && !t.text(r, *c_w).empty()) row.shift.weight = t.number(r, *c_w);
    try {
      row.shift.validate();
    } catch (const InvalidInput& e) {
      t.fail(r, e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_shift_table(const fs::path& path, const std::vector<ShiftRow>& rows) {
  std::string out = "field_kV_cm,species,location_id,delta_E_meV,delta_E_err_meV,weight\n";
  for (const auto& r : rows) {
    out += format_number(r.field_kV_cm) + "," + to_string(r.species) + "," + csv_field(r.shift.context) + "," +
           format_energy(r.shift.delta_E) + "," + format_energy(r.shift.delta_E_err) + "," +
           (r.shift.weight ? format_number(*r.shift.weight) : std::string{}) + "\n";
  }
  write_text_file(path, out);
}

}  // namespace qdstrain::io
