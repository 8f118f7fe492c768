#pragma once

// Experiment runner behind the `autonomy` binary.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autonomy/errors.hpp"
#include "autonomy/fock.hpp"
#include "autonomy/photodetector.hpp"

namespace autonomy::cli {

/// Bad command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"photodetect-ensemble", "heterodyne-ensemble", "evolve-kod",
                                                 "verify-identities", "povm-convergence"};
  return kinds;
}

struct StateSpec {
  enum class Kind { Fock, Coherent, DensityFile };
  Kind kind = Kind::Fock;
  int n = 0;
  Complex alpha{};
  std::string path;
};

struct GridSettings {
  double spacing = 0.05;
  double extent = 5.0;
  long steps = 3200;
  double initial_variance = 1e-3;
};

struct ExperimentConfig {
  std::string experiment;
  InstrumentParams params;
  int subblock = 20;
  std::optional<StateSpec> state;  // experiment-specific default when absent
  std::size_t trajectories = 10000;
  std::uint64_t seed = 0;
  long ode_steps = 1000;
  int n_max = 40;
  GridSettings grid;
  int quadrature_order = 32;
  int histogram_bins = 8;
  std::vector<double> sweep = {2.0, 3.0, 4.0, 5.0};  // kappa*T values
  std::size_t cooling_samples = 100000;
  std::optional<std::vector<std::string>> series;

  // Not part of the experiment identity.
  std::filesystem::path out = "out";
  unsigned threads = 1;
};

/// Parses a JSON config; unknown keys and out-of-range values raise UsageError.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& experiment);

/// Canonical JSON of every field that determines results (excludes out and threads).
nlohmann::json canonical_json(const ExperimentConfig& cfg);

/// Hex SHA-256 of canonical_json(cfg).dump().
std::string config_hash(const ExperimentConfig& cfg);

/// Resolves the initial state, loading density-matrix files when asked.
DensityOperator resolve_state(const ExperimentConfig& cfg);

struct Check {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::string experiment;
  std::vector<Check> checks;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string config_hash;
  std::vector<std::string> outputs;

  bool pass() const;
  /// Adds a check that passes when measured <= threshold (or >= for lower bounds).
  void upper(std::string name, double measured, double threshold);
  void lower(std::string name, double measured, double threshold);
  nlohmann::json to_json() const;
};

/// RFC-4180 table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::filesystem::path& path) const;
};

/// Shortest round-trip decimal form; empty for NaN.
std::string format_number(double v);

/// Runs the experiment, writes results.csv, report.json and the plot files
/// into cfg.out and returns the report.
VerificationReport run(const ExperimentConfig& cfg);

/// Names accepted by emit_plot_data.
const std::vector<std::string>& plot_series_names();

/// Writes plot_<name>.csv (two columns) for each series into `dir` and
/// returns the file names. Unknown names raise SpecError.
std::vector<std::string> emit_plot_data(const VerificationReport& report, const std::vector<std::string>& series,
                                        const ExperimentConfig& cfg, const std::filesystem::path& dir);

/// --threads value, else INSTRUMENT_AUTONOMY_THREADS, else hardware concurrency.
unsigned resolve_threads(std::optional<unsigned> flag);

}  // namespace autonomy::cli
