#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qdstrain/lineshape.hpp"
#include "qdstrain/phonon.hpp"
#include "qdstrain/spectrum.hpp"
#include "qdstrain/strain.hpp"

namespace qdstrain::io {

/// Comma-separated table with a header row. Blank lines and lines starting
/// with '#' are skipped; line numbers are kept for error messages.
class CsvTable {
 public:
  static CsvTable parse(std::string_view text, std::string source);
  static CsvTable read(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::size_t line(std::size_t row) const { return lines_[row]; }

  std::optional<std::size_t> find(std::string_view column) const;
  std::size_t column(std::string_view column) const;

  const std::string& text(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  double number(std::size_t row, std::size_t col) const;

  /// InvalidInput prefixed with "<source>: line N: ".
  [[noreturn]] void fail(std::size_t row, const std::string& what) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

/// Energies go out with 1e-4 meV resolution; everything else with 10
/// significant digits.
std::string format_energy(double meV);
std::string format_number(double v);

std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view content);

nlohmann::json meta_to_json(const SpectrumMeta& meta);
SpectrumMeta meta_from_json(const nlohmann::json& j);

/// Sidecar metadata lives next to the CSV as <stem>.meta.json.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// Header "energy_meV,intensity" or "wavelength_nm,intensity". The first
/// column must be strictly increasing; violations name the offending line.
Spectrum read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);

/// A JSON object {"meta": {...}, "energy_meV" | "wavelength_nm": [...],
/// "intensity": [...]} or an array of such objects.
std::vector<Spectrum> read_spectrum_json(const std::filesystem::path& path);
nlohmann::json spectrum_to_json(const Spectrum& spectrum);

/// Dispatches on the extension (.csv or .json).
std::vector<Spectrum> read_spectra(const std::filesystem::path& path);

struct PeakRow {
  std::string spectrum;  // source file stem
  std::size_t peak = 0;  // index within the spectrum, ascending energy
  Species species = Species::qd;
  PeakFit fit;
  SpectrumMeta meta;
};

void write_peak_csv(const std::filesystem::path& path, const std::vector<PeakRow>& rows);
std::vector<PeakRow> read_peak_csv(const std::filesystem::path& path);

/// Columns emitter,T_K,E_meV,E_err_meV. Emitters keep their first-seen order.
std::vector<std::pair<std::string, std::vector<TemperaturePoint>>> read_temperature_csv(
    const std::filesystem::path& path);
void write_temperature_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::vector<TemperaturePoint>>>& series);

struct QdEnergyRow {
  std::string sample;
  std::string material;
  std::string location_id;
  double energy = 0.0;  // meV
};

/// Columns sample,energy_meV; material and location_id are optional.
std::vector<QdEnergyRow> read_qd_energies(const std::filesystem::path& path);
void write_qd_energies(const std::filesystem::path& path, const std::vector<QdEnergyRow>& rows);

struct StrainRow {
  std::string sample;
  std::string material;
  double strain = 0.0;  // %
  double strain_err = 0.0;
};

/// Columns sample,material,strain_pct,strain_err_pct.
std::vector<StrainRow> read_strain_table(const std::filesystem::path& path);
void write_strain_table(const std::filesystem::path& path, const std::vector<StrainRow>& rows);

struct ShiftRow {
  double field_kV_cm = 0.0;
  Species species = Species::qd;
  ShiftMeasurement shift;  // context holds the location id
};

/// Columns field_kV_cm,species,location_id,delta_E_meV,delta_E_err_meV,weight
/// (weight may be empty).
std::vector<ShiftRow> read_shift_table(const std::filesystem::path& path);
void write_shift_table(const std::filesystem::path& path, const std::vector<ShiftRow>& rows);

}  // namespace qdstrain::io
