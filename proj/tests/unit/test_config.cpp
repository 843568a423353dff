#include <doctest.h>

#include "ember/config.hpp"
#include "ember/errors.hpp"

using namespace ember;

TEST_SUITE("config") {
  TEST_CASE("key value parsing") {
    const auto kv = KeyValueConfig::parse("# comment\n grid = 16x24 \nspeeds = 1, 2.5,4\nper_cell = true\n\n");
    CHECK(kv.get_string("grid", "") == "16x24");
    CHECK(kv.get_doubles("speeds", {}) == std::vector<double>{1, 2.5, 4});
    CHECK(kv.get_bool("per_cell", false));
    CHECK(kv.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("x = abc").get_double("x", 0), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/ember.cfg"), IoError);
  }

  TEST_CASE("grid parsing") {
    CHECK(parse_grid("32x32") == std::pair<std::size_t, std::size_t>{32, 32});
    CHECK(parse_grid("8x12") == std::pair<std::size_t, std::size_t>{8, 12});
    CHECK_THROWS_AS(parse_grid("32"), ConfigError);
    CHECK_THROWS_AS(parse_grid("0x4"), ConfigError);
    CHECK_THROWS_AS(parse_grid("ax4"), ConfigError);
  }

  TEST_CASE("desk defaults") {
    const PipelineConfig c;
    CHECK(c.rows == 32);
    CHECK(c.cols == 32);
    CHECK(c.steps == 20);
    CHECK(c.patterns.size() * c.speeds.size() * c.directions.size() == 60);
    CHECK(c.source_speed == 1.0);
    CHECK(c.source_direction == 230.0);
    CHECK(c.train_fraction == 0.5);
    CHECK(c.epochs == 40);
    CHECK(c.lr == 0.001);
    CHECK(c.layers == 4);
    CHECK(c.timing_repetitions == 10);
  }

  TEST_CASE("pipeline config round trip and validation") {
    auto kv = KeyValueConfig::parse(
        "grid = 12x14\nsteps = 6\npatterns = aerial,inward\nmode = pgcl\nlambda_ft = 0.5\nuse_gram = true\n"
        "error_norm = absolute\nseed = 9\n");
    const auto c = PipelineConfig::from(kv);
    CHECK(c.rows == 12);
    CHECK(c.cols == 14);
    CHECK(c.steps == 6);
    CHECK(c.patterns.size() == 2);
    CHECK(c.mode == emulator::Mode::PGCL);
    CHECK(c.weights.ft == 0.5);
    CHECK(c.weights.use_gram);
    CHECK(c.weights.norm == losses::ErrorNorm::Absolute);
    CHECK(c.seed == 9);
    const auto back = PipelineConfig::from(c.to_kv());
    CHECK(back.to_kv().dump() == c.to_kv().dump());
    CHECK_FALSE(c.bn_running_at_inference);
    CHECK(PipelineConfig::from(KeyValueConfig::parse("bn_inference = running")).bn_running_at_inference);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("bn_inference = frozen")), ConfigError);
    CHECK(c.weights.pp_per_cell);
    CHECK_FALSE(PipelineConfig::from(KeyValueConfig::parse("pp_normalise = none")).weights.pp_per_cell);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("pp_normalise = frames")), ConfigError);

    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("gird = 3x3")), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("mode = lstm")), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("directions = 360")), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("patterns = ring")), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from(KeyValueConfig::parse("train_fraction = 1")), ConfigError);
  }
}
