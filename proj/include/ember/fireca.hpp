#pragma once

// Seeded cellular-automata fire spread on a homogeneous grass grid.
//
// Rows run north to south, columns west to east. Wind direction is
// meteorological (the bearing the wind blows from); fire is pushed along
// (direction + 180) mod 360.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "ember/field.hpp"

namespace ember::fireca {

enum class IgnitionKind { Aerial, Inward, Outward, StripNorth, StripSouth };

inline constexpr IgnitionKind kAllIgnitionKinds[] = {IgnitionKind::Aerial, IgnitionKind::Inward,
                                                     IgnitionKind::Outward, IgnitionKind::StripNorth,
                                                     IgnitionKind::StripSouth};

/// Wire names: aerial, inward, outward, strip_north, strip_south.
std::string_view kind_name(IgnitionKind kind);
std::optional<IgnitionKind> parse_kind(std::string_view name);

struct IgnitionEvent {
  std::size_t step = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const IgnitionEvent&) const = default;
};

struct IgnitionPattern {
  IgnitionKind kind = IgnitionKind::StripSouth;
  std::vector<IgnitionEvent> schedule;

  /// Row-major 0/1 mask of every scheduled cell.
  std::vector<std::uint8_t> mask(std::size_t rows, std::size_t cols) const;
  bool operator==(const IgnitionPattern&) const = default;
};

/// Lays out the schedule for `kind`:
///   strip_south: one west-east line at row floor(0.85 M), t = 0
///   strip_north: the same at row floor(0.15 M)
///   inward:      rectangular ring inset floor(0.15 M) rows / floor(0.15 P) cols, t = 0
///   outward:     plus-shaped cluster (arms of 2 cells) at the grid center, t = 0
///   aerial:      ceil(M P / 400) distinct random cells, lit in quarters at t = 0, 2, 4, 6
/// Ring and cluster patterns need at least 8 x 8 cells (ConfigError otherwise).
IgnitionPattern build_ignition_pattern(IgnitionKind kind, std::size_t rows, std::size_t cols,
                                       std::uint64_t seed);

/// Calibration knobs of the spread rules.
struct SpreadParams {
  double p0 = 0.25;         // base ignition probability per burning neighbor per step
  double alpha = 0.3;       // downwind gain per m/s
  double dry_rate = 0.34;   // moisture lost per step while heated
  double burn_rate = 0.14;  // fuel consumed per step while burning
};

struct ScenarioConfig {
  std::size_t rows = 32;
  std::size_t cols = 32;
  std::size_t steps = 20;
  double cell_size_m = 2.0;
  double dt_s = 1.0;
  double wind_speed = 1.0;
  double wind_direction = 270.0;
  IgnitionPattern ignition;
  std::uint64_t seed = 1;
  double initial_fuel = 0.7;
  double initial_moisture = 1.0;
  SpreadParams spread;

  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

enum class CellStatus : std::uint8_t { Unignited, Igniting, Burning, BurnedOut };

struct CellState {
  double fuel = 0.0;
  double moisture = 0.0;
  CellStatus status = CellStatus::Unignited;
  bool operator==(const CellState&) const = default;
};

struct FireGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<CellState> cells;

  CellState& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  const CellState& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  bool operator==(const FireGrid&) const = default;
};

struct Wind {
  double speed = 0.0;
  double direction = 270.0;
};

/// Uniform [0, 1) with 53 random bits, identical on every standard library.
double uniform01(std::mt19937_64& rng);

FireGrid initial_grid(const ScenarioConfig& config);

/// Marks scheduled cells for `step` as Igniting (only cells still Unignited).
void apply_ignitions(FireGrid& grid, const IgnitionPattern& pattern, std::size_t step);

/// One synchronous update; every rule reads the incoming state:
///  (a) Igniting cells and cells next to a Burning cell dry by dry_rate (floored at 0)
///  (b) Igniting cells whose moisture was already 0 start Burning
///  (c) Burning cells lose burn_rate of fuel; exhausted cells become BurnedOut
///  (d) Unignited cells next to Burning cells ignite with probability
///      1 - prod_k (1 - p_k), p_k = clamp(p0 (1 + alpha speed max(0, cos theta_k)), 0, 1),
///      theta_k being the angle between the wind travel direction and the
///      neighbor-to-cell vector; one draw per candidate cell in row-major order.
FireGrid step(const FireGrid& state, const Wind& wind, const SpreadParams& params,
              std::mt19937_64& rng);

/// Runs config.steps frames. Frame t is the fuel field after the ignitions
/// scheduled at t and the (t+1)-th application of step().
FuelFieldSequence simulate(const ScenarioConfig& config);

}  // namespace ember::fireca
