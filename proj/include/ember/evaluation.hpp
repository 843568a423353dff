#pragma once

// Test-split scoring of models and match baselines, subgroup tables,
// inference timing and one-at-a-time loss ablation.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ember/baselines.hpp"
#include "ember/config.hpp"
#include "ember/dataset.hpp"
#include "ember/emulator.hpp"
#include "ember/metrics.hpp"
#include "ember/training.hpp"

namespace ember::evaluation {

using Predictor = std::function<FuelFieldSequence(const dataset::RunRecord&)>;

struct RunScores {
  std::string id;
  fireca::IgnitionKind pattern = fireca::IgnitionKind::StripSouth;
  double wind_speed = 0.0;
  double wind_direction = 0.0;
  metrics::MseSuite mse;
  metrics::Dmse dmse;
  metrics::Consistency consistency;
};

/// Means over runs of every scalar metric.
struct Summary {
  std::string name;
  std::size_t runs = 0;
  double mse = 0.0;
  double burned_mse = 0.0;
  double unburned_mse = 0.0;
  double fire_metrics_mse = 0.0;
  double dmse = 0.0;
  double metric_ft = 0.0;
  double metric_burned = 0.0;
  double metric_unburned = 0.0;
  double metric_fp = 0.0;
  double metric_fn = 0.0;
};

RunScores score_run(const dataset::RunRecord& run, const FuelFieldSequence& truth, const FuelFieldSequence& pred,
                    const losses::LossWeights& thresholds);
std::vector<RunScores> score_runs(const dataset::Dataset& data, const std::vector<std::string>& ids,
                                  const Predictor& predict, const losses::LossWeights& thresholds);
Summary summarize(const std::string& name, const std::vector<RunScores>& runs);

/// Inference-mode point prediction (the mixture mean in PGCL+ mode).
FuelFieldSequence predict(emulator::EmulatorModel& model, const Tensor& inputs);
Predictor model_predictor(emulator::EmulatorModel& model, const dataset::Dataset& data);

/// Library of the training runs.
baselines::HistoricalLibrary training_library(const dataset::Dataset& data);
Predictor match_ignition_predictor(const baselines::HistoricalLibrary& library, const dataset::Dataset& data);
Predictor match_wind_predictor(const baselines::HistoricalLibrary& library, const dataset::Dataset& data);

struct Scored {
  std::string name;
  std::vector<RunScores> runs;
};

struct Report {
  std::vector<Summary> rows;
  /// "speed=4", "direction=270", "pattern=aerial" groups per scored row.
  std::vector<std::pair<std::string, std::vector<Summary>>> subgroups;
  std::vector<Scored> scored;
};

Report build_report(std::vector<Scored> scored);

/// Human-readable table.
std::string report_text(const Report& report);
/// Sorted key = value lines; values are exact (shortest round-trip).
std::string report_kv(const Report& report);

struct TimingComparison {
  metrics::Timing emulator;
  metrics::Timing simulator;
  double speedup() const { return emulator.mean > 0.0 ? simulator.mean / emulator.mean : 0.0; }
};

/// Times inference (channel assembly + forward) against running the
/// simulator, pooling repetitions x test runs.
TimingComparison time_inference(emulator::EmulatorModel& model, const dataset::Dataset& data,
                                const std::vector<std::string>& ids, std::size_t repetitions);

struct AblationRow {
  std::string name;  // FT, B, U, FM
  Summary summary;
};

struct AblationTable {
  AblationRow reference;  // no constraint
  std::vector<AblationRow> rows;
};

/// The four one-term weight sets: FT, B (burned), U (unburned), FM (ROS + BA).
std::vector<std::pair<std::string, losses::LossWeights>> ablation_sets(const losses::LossWeights& base);

/// Trains one MSE-based model per set with the shared seed and scores it on
/// the test split. A supplied reference summary is used as-is instead of
/// training the unconstrained model again.
AblationTable ablate(const dataset::Dataset& data, const PipelineConfig& config, const Summary* reference,
                     std::ostream* progress);
std::string ablation_text(const AblationTable& table);
std::string ablation_kv(const AblationTable& table);

}  // namespace ember::evaluation
