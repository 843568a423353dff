#include <doctest.h>

#include <algorithm>
#include <set>

#include "ember/container.hpp"
#include "ember/dataset.hpp"
#include "ember/errors.hpp"
#include "fixtures.hpp"

using namespace ember;
using namespace ember::dataset;
namespace fs = std::filesystem;

TEST_SUITE("dataset") {
  TEST_CASE("desk sweep has 60 runs split in half") {
    ember::testing::TempDir dir("desk");
    PipelineConfig c;
    const auto m = generate_dataset(c, dir.path());
    CHECK(m.runs.size() == 60);
    CHECK(m.train.size() == 30);
    CHECK(m.test.size() == 30);
    CHECK(m.sources.size() == 5);
    CHECK(m.rows == 32);
    CHECK(m.steps == 20);
    std::set<std::string> train(m.train.begin(), m.train.end());
    for (const auto& id : m.test) CHECK(train.count(id) == 0);
    CHECK(train.size() + m.test.size() == 60);
    CHECK(fs::exists(dir.path() / "manifest.json"));
    CHECK(DatasetManifest::load(dir.path() / "manifest.json").to_json() == m.to_json());
  }

  TEST_CASE("empty sweep writes nothing") {
    ember::testing::TempDir dir("empty");
    auto c = ember::testing::tiny_config(dir.path());
    c.speeds.clear();
    const auto m = generate_dataset(c, dir.path() / "data");
    CHECK(m.runs.empty());
    CHECK_FALSE(fs::exists(dir.path() / "data" / "manifest.json"));
  }

  TEST_CASE("regeneration is byte identical") {
    ember::testing::TempDir a("regen_a"), b("regen_b");
    const auto c = ember::testing::tiny_config(a.path());
    const auto ma = generate_dataset(c, a.path());
    generate_dataset(c, b.path());
    for (const auto& entry : fs::directory_iterator(a.path())) {
      const auto name = entry.path().filename();
      CHECK(container::read_file(entry.path()) == container::read_file(b.path() / name));
    }
    CHECK(ma.runs.size() == 8);
  }

  TEST_CASE("scaling comes from the training runs only") {
    DatasetManifest m;
    m.runs = {{"000", fireca::IgnitionKind::Aerial, 1.0, 230.0, 1, "a"},
              {"001", fireca::IgnitionKind::Aerial, 4.0, 270.0, 2, "b"},
              {"002", fireca::IgnitionKind::Aerial, 9.0, 330.0, 3, "c"}};
    m.train = {"000", "001"};
    m.test = {"002"};
    const auto s = fit_scaling(m);
    CHECK(s.speed_min == 1.0);
    CHECK(s.speed_max == 4.0);
    CHECK(s.direction_max == 270.0);
    bool clamped = false;
    CHECK(min_max(9.0, 1.0, 4.0, &clamped) == 1.0);
    CHECK(clamped);
    CHECK(min_max(2.5, 1.0, 4.0, &clamped) == 0.5);
    CHECK_FALSE(clamped);
    CHECK(min_max(3.0, 3.0, 3.0) == 0.0);
  }

  TEST_CASE("split is seeded and disjoint") {
    DatasetManifest m;
    for (int i = 0; i < 10; ++i) m.runs.push_back({std::to_string(100 + i), fireca::IgnitionKind::Aerial, 1, 230, 0, ""});
    split_runs(m, 0.5, 3);
    const auto first = m.train;
    split_runs(m, 0.5, 3);
    CHECK(m.train == first);
    CHECK(std::is_sorted(m.train.begin(), m.train.end()));
    split_runs(m, 0.3, 3);
    CHECK(m.train.size() == 3);
    CHECK(m.test.size() == 7);
  }

  TEST_CASE("channels") {
    ember::testing::TempDir dir("channels");
    const auto c = ember::testing::tiny_config(dir.path());
    generate_dataset(c, dir.path());
    const auto data = Dataset::load(dir.path());
    const auto& m = data.manifest();

    auto at_min = m.scenario(fireca::IgnitionKind::StripSouth, m.scaling.speed_min, m.scaling.direction_min, 1);
    const auto x0 = data.inputs(at_min);
    CHECK(x0.shape() == Shape{12, 10, 10, 4});
    auto at_max = m.scenario(fireca::IgnitionKind::StripSouth, m.scaling.speed_max, m.scaling.direction_max, 1);
    const auto x1 = data.inputs(at_max);
    for (std::size_t i = 0; i < x0.numel(); i += 4) {
      CHECK(x0.data()[i] == 0.0);
      CHECK(x0.data()[i + 1] == 0.0);
      CHECK(x1.data()[i] == 1.0);
      CHECK(x1.data()[i + 1] == 1.0);
    }
    // Frame 0 ignition channel is exactly the strip (row floor(0.85 * 10) = 8).
    for (std::size_t r = 0; r < 10; ++r) {
      for (std::size_t col = 0; col < 10; ++col) CHECK(x0.at({0, r, col, 2}) == (r == 8 ? 1.0 : 0.0));
    }
    const auto& src = data.sources().at(fireca::IgnitionKind::StripSouth);
    for (std::size_t t = 0; t < 4; ++t) CHECK(x0.at({t, 5, 5, 3}) == src.at(t, 5, 5));

    auto aerial = m.scenario(fireca::IgnitionKind::Aerial, 1, 230, 1);
    try {
      data.inputs(aerial);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("aerial") != std::string::npos);
    }
  }

  TEST_CASE("cumulative ignition channel") {
    ember::testing::TempDir dir("cumulative");
    auto c = ember::testing::tiny_config(dir.path());
    c.steps = 8;
    c.patterns = {fireca::IgnitionKind::Aerial};
    c.rows = c.cols = 40;  // four drops, one per quarter
    generate_dataset(c, dir.path());
    const auto data = Dataset::load(dir.path());
    const auto cfg = data.manifest().scenario(data.manifest().runs[0]);
    const auto x = data.inputs(cfg);
    double prev = 0.0;
    for (std::size_t t = 0; t < 8; ++t) {
      double lit = 0.0;
      for (std::size_t i = 0; i < 1600; ++i) lit += x.data()[(t * 1600 + i) * 4 + 2];
      CHECK(lit >= prev);
      prev = lit;
    }
    CHECK(prev == 4.0);
  }
}
