#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roa/region.hpp"
#include "roa/ucb.hpp"

namespace roa::cli {

/// Process exit codes. Library errors map to one code per error class.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kParse = 10,
  kEquilibrium = 11,
  kTopology = 12,
  kDimension = 13,
  kNonFinite = 14,
  kNotConverged = 15,
  kDegenerateTrajectory = 16,
  kNotHurwitz = 17,
  kFactorization = 18,
  kEmptyDomain = 19,
  kBudgetExhausted = 20,
  kCertificateVoid = 21,
  kIndex = 22,
  kConsistency = 23,
  kConfig = 24,
};

/// Exit code for an error class name as returned by Error::kind().
int exit_code_for(const std::string& kind);

/// "lo:hi,lo:hi,..." with one range per state dimension, or two ranges
/// (angles, then speeds) broadcast over the machines of a 2M state.
Box parse_box(const std::string& text, int state_dim);
/// "a:b,c:d" plane pairs.
std::vector<std::pair<int, int>> parse_planes(const std::string& text);

RegionMode parse_mode(const std::string& text);
std::string mode_name(RegionMode mode);

struct RegionSettings {
  RegionMode mode = RegionMode::Equilibrium;
  std::array<int, 2> resolution{200, 200};
  std::int64_t volume_samples = 100000;
};

/// Experiment file: {"sampler": {...}, "box": {"lower", "upper",
/// "exclusion_radius"}, "region": {"mode", "resolution", "volume_samples"}}.
struct ExperimentConfig {
  UcbConfig sampler;
  std::optional<std::vector<double>> box_lower;
  std::optional<std::vector<double>> box_upper;
  std::optional<double> exclusion_radius;
  RegionSettings region;

  /// Sampling box for a state of dimension `state_dim`. Two-entry bounds
  /// are broadcast as (angle, speed) pairs.
  Box box(int state_dim) const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

struct SampleOptions {
  /// A previous run's manifest supplies the system and config snapshot.
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> system;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> box;
  bool quiet = false;
};

struct RegionOptions {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> records;
  std::optional<std::filesystem::path> system;
  std::optional<std::string> mode;
  std::optional<std::string> box;
  std::optional<std::string> planes;
  std::optional<std::array<int, 2>> resolution;
  std::filesystem::path out_dir;
};

struct VolumeOptions {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> records;
  std::optional<std::filesystem::path> system;
  std::optional<std::string> mode;
  std::optional<std::string> box;
  std::optional<std::int64_t> samples;
  std::uint64_t seed = 1;
};

/// Runs the sampling loop and writes records.csv, model.json and
/// manifest.json into the output directory.
void cmd_sample(const SampleOptions& opt, std::ostream& log);
/// Writes grid or slice CSVs, certified boundary overlays and slices.json.
void cmd_region(const RegionOptions& opt, std::ostream& out);
/// Prints the volume ratio as one line of JSON.
void cmd_volume(const VolumeOptions& opt, std::ostream& out);

/// Full command-line entry point. Errors are reported on `err` with their
/// class name and mapped to an exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace roa::cli
