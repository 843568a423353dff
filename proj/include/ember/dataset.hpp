#pragma once

// Desk dataset: a sweep of simulator runs, a train/test split, wind scaling
// fitted on the training runs, and one source-setting run per pattern.
//
// On disk (under <out>/data):
//   manifest.json
//   run_<id>.embr        ground-truth [T, M, P] sequence per run
//   source_<pattern>.embr

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ember/config.hpp"
#include "ember/field.hpp"
#include "ember/fireca.hpp"
#include "ember/tensor.hpp"

namespace ember::dataset {

struct RunRecord {
  std::string id;
  fireca::IgnitionKind pattern = fireca::IgnitionKind::StripSouth;
  double wind_speed = 0.0;
  double wind_direction = 0.0;
  std::uint64_t seed = 0;
  std::string file;  // relative to the data directory
};

struct Scaling {
  double speed_min = 0.0;
  double speed_max = 0.0;
  double direction_min = 0.0;
  double direction_max = 0.0;
};

struct DatasetManifest {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t steps = 0;
  std::uint64_t pattern_seed = 0;
  double initial_fuel = 0.7;
  double initial_moisture = 1.0;
  fireca::SpreadParams spread;
  double source_speed = 1.0;
  double source_direction = 230.0;
  std::vector<RunRecord> runs;
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::map<fireca::IgnitionKind, std::string> sources;  // pattern -> file
  Scaling scaling;

  const RunRecord& run(const std::string& id) const;
  /// Rebuilds the simulator config of a run.
  fireca::ScenarioConfig scenario(const RunRecord& run) const;
  fireca::ScenarioConfig scenario(fireca::IgnitionKind pattern, double speed, double direction,
                                  std::uint64_t seed) const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

/// Runs the sweep patterns x speeds x directions plus the per-pattern source
/// runs, writes everything under data_dir and returns the manifest. An empty
/// sweep writes nothing.
DatasetManifest generate_dataset(const PipelineConfig& config, const std::filesystem::path& data_dir);

/// Seeded split; the first round(train_fraction * n) shuffled ids train.
void split_runs(DatasetManifest& manifest, double train_fraction, std::uint64_t seed);
/// Min/max of wind speed and direction over the training runs.
Scaling fit_scaling(const DatasetManifest& manifest);
/// (v - lo) / (hi - lo) clamped to [0, 1]; a degenerate range maps to 0.
/// Sets *clamped when the value fell outside [lo, hi].
double min_max(double v, double lo, double hi, bool* clamped = nullptr);

/// [T, M, P, 4]: scaled speed, scaled direction, cumulative ignition mask,
/// source-setting fuel sequence. Throws ConfigError if the source sequence is
/// missing or its dims differ.
Tensor assemble_channels(const fireca::ScenarioConfig& run, const DatasetManifest& manifest,
                         const std::map<fireca::IgnitionKind, FuelFieldSequence>& sources);

/// A manifest plus every sequence it references, loaded into memory.
class Dataset {
 public:
  static Dataset load(const std::filesystem::path& data_dir);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  const FuelFieldSequence& sequence(const std::string& id) const;
  const std::map<fireca::IgnitionKind, FuelFieldSequence>& sources() const { return sources_; }
  Tensor inputs(const fireca::ScenarioConfig& config) const;
  Tensor inputs(const std::string& id) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path dir_;
  std::map<std::string, FuelFieldSequence> sequences_;
  std::map<fireca::IgnitionKind, FuelFieldSequence> sources_;
};

}  // namespace ember::dataset
