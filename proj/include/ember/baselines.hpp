#pragma once

// Nearest-run retrieval baselines: predict a scenario by copying the closest
// historical run, by ignition geometry or by wind.

#include <cstddef>
#include <vector>

#include "ember/field.hpp"
#include "ember/fireca.hpp"

namespace ember::baselines {

struct HistoricalRun {
  fireca::ScenarioConfig config;
  FuelFieldSequence sequence;
};

/// Training runs in stable insertion order.
class HistoricalLibrary {
 public:
  /// Throws DimensionError if the sequence dims differ from earlier entries.
  void add(fireca::ScenarioConfig config, FuelFieldSequence sequence);
  const std::vector<HistoricalRun>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// max - min wind speed over the entries.
  double speed_range() const;

 private:
  std::vector<HistoricalRun> entries_;
};

struct Match {
  std::size_t index = 0;
  double distance = 0.0;
  bool speed_term_dropped = false;  // match_wind on a library with one speed
  const FuelFieldSequence* sequence = nullptr;
};

/// 1 - IoU of two 0/1 masks; two empty masks are identical (0).
double mask_distance(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);
/// Smallest circular difference in degrees, in [0, 180].
double angular_difference(double a_deg, double b_deg);

/// Entry whose ignition mask has the highest IoU with the query's; ties go to
/// the lowest index. Throws RetrievalError on an empty library.
Match match_ignition(const fireca::ScenarioConfig& query, const HistoricalLibrary& library);

/// Entry minimizing (dspeed / speed_range)^2 + (angular_difference / 180)^2;
/// ties go to the lowest index. A zero speed range drops the speed term.
Match match_wind(const fireca::ScenarioConfig& query, const HistoricalLibrary& library);

}  // namespace ember::baselines
