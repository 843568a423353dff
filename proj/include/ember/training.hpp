#pragma once

// Batch-size-1 training of the emulator and checkpoint I/O.
//
// A checkpoint directory holds model.txt (architecture), config.txt (the
// pipeline config echo) and one EMBR file per named tensor under weights/.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ember/config.hpp"
#include "ember/dataset.hpp"
#include "ember/emulator.hpp"
#include "ember/losses.hpp"

namespace ember::training {

struct TrainOptions {
  emulator::Mode mode = emulator::Mode::CL;
  losses::LossWeights weights;  // base is derived from mode
  std::size_t epochs = 40;
  double lr = 0.001;
  std::uint64_t seed = 1;
  std::size_t hidden = 8;
  std::size_t layers = 4;
  double sigma_floor = 0.01;
  bool bn_running_at_inference = false;
  std::ostream* progress = nullptr;
};

/// CL trains on MSE alone, PGCL adds the physics terms enabled in the config,
/// PGCL+ swaps the base for the mixture NLL and adds the Poisson term.
TrainOptions options_for(const PipelineConfig& config, emulator::Mode mode);

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step, 0 for epoch means
  std::string run;
  double total = 0.0;
  double base = 0.0;
  std::array<double, losses::kTermCount> terms{};
};

struct TrainResult {
  emulator::EmulatorModel model;
  std::vector<LossRecord> epochs;
  std::vector<LossRecord> steps;
  double prior_rate = 0.0;
  double mean_fuel = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

/// Mean per-frame count of cells below eps_b over the training runs.
double training_prior_rate(const dataset::Dataset& data, double eps_b);

/// Adam over the training split in a seeded shuffle each epoch. A non-finite
/// loss or gradient stops training with the parameters of the last good step
/// restored and aborted set.
TrainResult train(const dataset::Dataset& data, const TrainOptions& options);

struct Checkpoint {
  emulator::EmulatorModel model;
  double prior_rate = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t steps = 0;
};

void save_checkpoint(const std::filesystem::path& dir, emulator::EmulatorModel& model, double prior_rate,
                     const dataset::DatasetManifest& manifest, const KeyValueConfig& config_echo);
/// Throws IoError / ConfigError on missing or inconsistent files.
Checkpoint load_checkpoint(const std::filesystem::path& dir);
/// Throws ConfigError unless the checkpoint was trained on the manifest's dims.
void require_compatible(const Checkpoint& checkpoint, const dataset::DatasetManifest& manifest);

/// One line per record: epoch step run total base <terms...>.
void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& records);

}  // namespace ember::training
