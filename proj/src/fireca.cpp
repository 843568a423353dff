#include "ember/fireca.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "ember/errors.hpp"

namespace ember::fireca {

namespace {

constexpr std::array<std::pair<int, int>, 8> kNeighbors{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

void require_ring_room(IgnitionKind kind, std::size_t rows, std::size_t cols) {
  if (rows < 8 || cols < 8) {
    throw ConfigError("ignition: " + std::string(kind_name(kind)) + " needs at least 8x8 cells, grid is " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

std::string_view kind_name(IgnitionKind kind) {
  switch (kind) {
    case IgnitionKind::Aerial: return "aerial";
    case IgnitionKind::Inward: return "inward";
    case IgnitionKind::Outward: return "outward";
    case IgnitionKind::StripNorth: return "strip_north";
    case IgnitionKind::StripSouth: return "strip_south";
  }
  return "unknown";
}

std::optional<IgnitionKind> parse_kind(std::string_view name) {
  for (auto k : kAllIgnitionKinds) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> IgnitionPattern::mask(std::size_t rows, std::size_t cols) const {
  std::vector<std::uint8_t> m(rows * cols, 0);
  for (const auto& e : schedule) {
    if (e.row < rows && e.col < cols) m[e.row * cols + e.col] = 1;
  }
  return m;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

IgnitionPattern build_ignition_pattern(IgnitionKind kind, std::size_t rows, std::size_t cols,
                                       std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ConfigError("ignition: grid must be non-empty");
  IgnitionPattern pattern;
  pattern.kind = kind;
  auto& events = pattern.schedule;
  switch (kind) {
    case IgnitionKind::StripSouth:
    case IgnitionKind::StripNorth: {
      const double frac = kind == IgnitionKind::StripSouth ? 0.85 : 0.15;
      const auto row = static_cast<std::size_t>(std::floor(frac * static_cast<double>(rows)));
      for (std::size_t c = 0; c < cols; ++c) events.push_back({0, row, c});
      break;
    }
    case IgnitionKind::Inward: {
      require_ring_room(kind, rows, cols);
      const auto ir = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(rows)));
      const auto ic = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(cols)));
      const std::size_t top = ir;
      const std::size_t bottom = rows - 1 - ir;
      const std::size_t left = ic;
      const std::size_t right = cols - 1 - ic;
      for (std::size_t r = top; r <= bottom; ++r) {
        for (std::size_t c = left; c <= right; ++c) {
          if (r == top || r == bottom || c == left || c == right) events.push_back({0, r, c});
        }
      }
      break;
    }
    case IgnitionKind::Outward: {
      require_ring_room(kind, rows, cols);
      constexpr std::size_t arm = 2;
      const std::size_t cr = rows / 2;
      const std::size_t cc = cols / 2;
      for (std::size_t r = cr - arm; r <= cr + arm; ++r) {
        for (std::size_t c = cc - arm; c <= cc + arm; ++c) {
          if (r == cr || c == cc) events.push_back({0, r, c});
        }
      }
      break;
    }
    case IgnitionKind::Aerial: {
      const std::size_t cells = rows * cols;
      const std::size_t count = (cells + 399) / 400;
      std::mt19937_64 rng(seed);
      std::vector<std::uint8_t> taken(cells, 0);
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t idx;
        do {
          idx = std::min(cells - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(cells)));
        } while (taken[idx]);
        taken[idx] = 1;
        const std::size_t batch = (4 * i) / count;  // quarters of the drop list
        events.push_back({2 * batch, idx / cols, idx % cols});
      }
      break;
    }
  }
  return pattern;
}

void ScenarioConfig::validate() const {
  if (rows < 1 || cols < 1 || steps < 1) throw ConfigError("scenario: rows, cols and steps must be >= 1");
  if (!(wind_speed >= 0.0)) throw ConfigError("scenario: wind_speed must be >= 0");
  if (!(wind_direction >= 0.0 && wind_direction < 360.0)) {
    throw ConfigError("scenario: wind_direction must lie in [0, 360)");
  }
  if (!(initial_fuel > 0.0 && initial_fuel <= 0.7)) {
    throw ConfigError("scenario: initial_fuel must lie in (0, 0.7]");
  }
  if (!(initial_moisture >= 0.0 && initial_moisture <= 1.0)) {
    throw ConfigError("scenario: initial_moisture must lie in [0, 1]");
  }
  if (!(cell_size_m > 0.0) || !(dt_s > 0.0)) throw ConfigError("scenario: cell size and dt must be positive");
  if (!(spread.dry_rate > 0.0) || !(spread.burn_rate > 0.0)) {
    throw ConfigError("scenario: dry_rate and burn_rate must be positive");
  }
  for (const auto& e : ignition.schedule) {
    if (e.row >= rows || e.col >= cols) {
      throw ConfigError("scenario: ignition cell (" + std::to_string(e.row) + ", " +
                        std::to_string(e.col) + ") is outside the grid");
    }
    if (e.step >= steps) {
      throw ConfigError("scenario: ignition at step " + std::to_string(e.step) +
                        " is not before T = " + std::to_string(steps));
    }
  }
}

FireGrid initial_grid(const ScenarioConfig& config) {
  FireGrid g;
  g.rows = config.rows;
  g.cols = config.cols;
  g.cells.assign(config.rows * config.cols,
                 CellState{config.initial_fuel, config.initial_moisture, CellStatus::Unignited});
  return g;
}

void apply_ignitions(FireGrid& grid, const IgnitionPattern& pattern, std::size_t step) {
  for (const auto& e : pattern.schedule) {
    if (e.step != step) continue;
    auto& cell = grid.at(e.row, e.col);
    if (cell.status == CellStatus::Unignited) cell.status = CellStatus::Igniting;
  }
}

FireGrid step(const FireGrid& state, const Wind& wind, const SpreadParams& params,
              std::mt19937_64& rng) {
  FireGrid next = state;
  const double bearing = std::fmod(wind.direction + 180.0, 360.0) * std::numbers::pi / 180.0;
  const double travel_east = std::sin(bearing);
  const double travel_north = std::cos(bearing);

  // Ignition probability contributed by a burning neighbor at offset (dr, dc).
  std::array<double, 8> p_from{};
  for (std::size_t k = 0; k < kNeighbors.size(); ++k) {
    const auto [dr, dc] = kNeighbors[k];
    // Neighbor-to-cell vector: east = -dc, north = +dr (rows grow southward).
    const double east = -dc;
    const double north = dr;
    const double cos_theta = (travel_east * east + travel_north * north) / std::hypot(east, north);
    const double p = params.p0 * (1.0 + params.alpha * wind.speed * std::max(0.0, cos_theta));
    p_from[k] = std::clamp(p, 0.0, 1.0);
  }

  const auto rows = static_cast<std::ptrdiff_t>(state.rows);
  const auto cols = static_cast<std::ptrdiff_t>(state.cols);
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      const auto& prev = state.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      auto& cell = next.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));

      bool heated = false;
      double no_ignite = 1.0;
      for (std::size_t k = 0; k < kNeighbors.size(); ++k) {
        const auto nr = r + kNeighbors[k].first;
        const auto nc = c + kNeighbors[k].second;
        if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
        if (state.at(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)).status ==
            CellStatus::Burning) {
          heated = true;
          no_ignite *= 1.0 - p_from[k];
        }
      }

      // (a) drying
      if (prev.status == CellStatus::Igniting || heated) {
        cell.moisture = std::max(0.0, prev.moisture - params.dry_rate);
      }
      // (b) moisture gate
      if (prev.status == CellStatus::Igniting && prev.moisture == 0.0) {
        cell.status = CellStatus::Burning;
      }
      // (c) combustion
      if (prev.status == CellStatus::Burning) {
        cell.fuel = std::max(0.0, prev.fuel - params.burn_rate);
        if (cell.fuel == 0.0) cell.status = CellStatus::BurnedOut;
      }
      // (d) spread
      if (prev.status == CellStatus::Unignited && heated) {
        if (uniform01(rng) < 1.0 - no_ignite) cell.status = CellStatus::Igniting;
      }
    }
  }
  return next;
}

FuelFieldSequence simulate(const ScenarioConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  FireGrid grid = initial_grid(config);
  const Wind wind{config.wind_speed, config.wind_direction};
  FuelFieldSequence out(config.steps, config.rows, config.cols);
  const std::size_t frame = config.rows * config.cols;
  for (std::size_t t = 0; t < config.steps; ++t) {
    apply_ignitions(grid, config.ignition, t);
    grid = step(grid, wind, config.spread, rng);
    for (std::size_t i = 0; i < frame; ++i) out.values[t * frame + i] = grid.cells[i].fuel;
  }
  return out;
}

}  // namespace ember::fireca
