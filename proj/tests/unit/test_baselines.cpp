#include <doctest.h>

#include "ember/baselines.hpp"
#include "ember/errors.hpp"

using namespace ember;
using namespace ember::baselines;
using fireca::IgnitionKind;

namespace {

fireca::ScenarioConfig config(IgnitionKind kind, double speed, double direction, std::size_t n = 20) {
  fireca::ScenarioConfig c;
  c.rows = n;
  c.cols = n;
  c.steps = 3;
  c.wind_speed = speed;
  c.wind_direction = direction;
  c.ignition = fireca::build_ignition_pattern(kind, n, n, 5);
  return c;
}

FuelFieldSequence tagged(double v, std::size_t n = 20) { return FuelFieldSequence(3, n, n, v); }

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("mask distance") {
    CHECK(mask_distance({0, 0}, {0, 0}) == 0.0);
    CHECK(mask_distance({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(1.0 - 1.0 / 3.0));
    CHECK(mask_distance({1, 0}, {0, 1}) == 1.0);
  }

  TEST_CASE("angular difference is circular") {
    CHECK(angular_difference(350, 10) == doctest::Approx(20.0));
    CHECK(angular_difference(10, 350) == doctest::Approx(20.0));
    CHECK(angular_difference(0, 180) == doctest::Approx(180.0));
  }

  TEST_CASE("ignition match returns the identical pattern") {
    HistoricalLibrary lib;
    lib.add(config(IgnitionKind::StripNorth, 1, 270), tagged(0.1));
    lib.add(config(IgnitionKind::Inward, 1, 270), tagged(0.2));
    lib.add(config(IgnitionKind::Outward, 1, 270), tagged(0.3));
    lib.add(config(IgnitionKind::StripSouth, 8, 310), tagged(0.4));
    const auto m = match_ignition(config(IgnitionKind::StripSouth, 1, 230), lib);
    CHECK(m.index == 3);
    CHECK(m.distance == 0.0);
    CHECK(m.sequence == &lib.entries()[3].sequence);
  }

  TEST_CASE("shifted strip is nearest to strip south") {
    HistoricalLibrary lib;
    auto shifted = config(IgnitionKind::StripSouth, 1, 270);
    for (auto& e : shifted.ignition.schedule) e.row -= 1;
    lib.add(config(IgnitionKind::StripNorth, 1, 270), tagged(0.1));
    lib.add(config(IgnitionKind::Inward, 1, 270), tagged(0.2));
    // Half of the shifted strip's cells overlap the query strip.
    for (std::size_t c = 0; c < 10; ++c) shifted.ignition.schedule[c].row += 1;
    lib.add(shifted, tagged(0.3));
    const auto m = match_ignition(config(IgnitionKind::StripSouth, 1, 270), lib);
    CHECK(m.index == 2);
    CHECK(m.distance == doctest::Approx(1.0 - 10.0 / 30.0));
  }

  TEST_CASE("ties go to the first index") {
    HistoricalLibrary lib;
    lib.add(config(IgnitionKind::Inward, 1, 270), tagged(0.0));
    lib.add(config(IgnitionKind::StripNorth, 4, 230), tagged(0.1));
    lib.add(config(IgnitionKind::Outward, 1, 270), tagged(0.2));
    lib.add(config(IgnitionKind::Inward, 1, 270), tagged(0.3));
    lib.add(config(IgnitionKind::StripNorth, 4, 230), tagged(0.4));
    CHECK(match_ignition(config(IgnitionKind::StripNorth, 8, 330), lib).index == 1);
    CHECK(match_wind(config(IgnitionKind::Aerial, 4, 230), lib).index == 1);
  }

  TEST_CASE("wind match") {
    HistoricalLibrary lib;
    lib.add(config(IgnitionKind::StripSouth, 1, 270), tagged(0.1));
    lib.add(config(IgnitionKind::StripSouth, 5, 330), tagged(0.2));
    CHECK(lib.speed_range() == 4.0);
    const auto m = match_wind(config(IgnitionKind::StripSouth, 5, 270), lib);
    CHECK(m.index == 1);
    CHECK(m.distance == doctest::Approx(1.0 / 3.0));
    HistoricalLibrary first;
    first.add(config(IgnitionKind::StripSouth, 1, 270), tagged(0.1));
    first.add(config(IgnitionKind::StripSouth, 5, 270), tagged(0.1));
    CHECK(match_wind(config(IgnitionKind::StripSouth, 5, 270), first).distance == 0.0);
    CHECK(angular_difference(270, 330) / 180.0 == doctest::Approx(1.0 / 3.0));
    CHECK(match_wind(config(IgnitionKind::StripSouth, 1, 270), lib).distance == 0.0);
  }

  TEST_CASE("single-speed library drops the speed term") {
    HistoricalLibrary lib;
    lib.add(config(IgnitionKind::StripSouth, 4, 270), tagged(0.1));
    lib.add(config(IgnitionKind::StripSouth, 4, 330), tagged(0.2));
    const auto m = match_wind(config(IgnitionKind::StripSouth, 9, 320), lib);
    CHECK(m.speed_term_dropped);
    CHECK(m.index == 1);
  }

  TEST_CASE("retrieval is deterministic and errors are typed") {
    HistoricalLibrary lib;
    CHECK_THROWS_AS(match_ignition(config(IgnitionKind::StripSouth, 1, 270), lib), RetrievalError);
    CHECK_THROWS_AS(match_wind(config(IgnitionKind::StripSouth, 1, 270), lib), RetrievalError);
    lib.add(config(IgnitionKind::Aerial, 1, 270), tagged(0.1));
    lib.add(config(IgnitionKind::Outward, 8, 230), tagged(0.2));
    const auto q = config(IgnitionKind::Inward, 3, 300);
    CHECK(match_wind(q, lib).index == match_wind(q, lib).index);
    CHECK(match_ignition(q, lib).index == match_ignition(q, lib).index);
    CHECK_THROWS_AS(lib.add(config(IgnitionKind::Aerial, 1, 270, 12), tagged(0.1, 12)), DimensionError);
  }
}
