#include "ember/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ember/errors.hpp"

namespace ember::baselines {

void HistoricalLibrary::add(fireca::ScenarioConfig config, FuelFieldSequence sequence) {
  if (!entries_.empty()) {
    const auto& first = entries_.front().sequence;
    require_same_dims(first.view(), sequence.view(), "historical library");
  }
  entries_.push_back({std::move(config), std::move(sequence)});
}

double HistoricalLibrary::speed_range() const {
  if (entries_.empty()) return 0.0;
  double lo = entries_.front().config.wind_speed;
  double hi = lo;
  for (const auto& e : entries_) {
    lo = std::min(lo, e.config.wind_speed);
    hi = std::max(hi, e.config.wind_speed);
  }
  return hi - lo;
}

double mask_distance(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("mask_distance: masks of " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " cells");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double angular_difference(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

namespace {

template <class Distance>
Match nearest(const HistoricalLibrary& library, Distance distance, const char* who) {
  if (library.empty()) throw RetrievalError(std::string(who) + ": historical library is empty");
  Match best;
  for (std::size_t i = 0; i < library.size(); ++i) {
    const double d = distance(library.entries()[i]);
    if (i == 0 || d < best.distance) {
      best.index = i;
      best.distance = d;
    }
  }
  best.sequence = &library.entries()[best.index].sequence;
  return best;
}

}  // namespace

Match match_ignition(const fireca::ScenarioConfig& query, const HistoricalLibrary& library) {
  const auto q = query.ignition.mask(query.rows, query.cols);
  return nearest(
      library,
      [&](const HistoricalRun& e) {
        if (e.config.rows != query.rows || e.config.cols != query.cols) {
          throw DimensionError("match_ignition: library grid differs from the query grid");
        }
        return mask_distance(q, e.config.ignition.mask(e.config.rows, e.config.cols));
      },
      "match_ignition");
}

Match match_wind(const fireca::ScenarioConfig& query, const HistoricalLibrary& library) {
  const double range = library.speed_range();
  const bool drop_speed = range == 0.0;
  auto m = nearest(
      library,
      [&](const HistoricalRun& e) {
        const double ds = drop_speed ? 0.0 : (query.wind_speed - e.config.wind_speed) / range;
        const double da = angular_difference(query.wind_direction, e.config.wind_direction) / 180.0;
        return std::sqrt(ds * ds + da * da);
      },
      "match_wind");
  m.speed_term_dropped = drop_speed;
  return m;
}

}  // namespace ember::baselines
