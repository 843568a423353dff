#include "ember/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ember/container.hpp"
#include "ember/errors.hpp"

namespace ember::dataset {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

fireca::IgnitionKind kind_from(const std::string& name) {
  auto k = fireca::parse_kind(name);
  if (!k) throw ConfigError("manifest: unknown ignition pattern '" + name + "'");
  return *k;
}

std::string run_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", index);
  return buf;
}

}  // namespace

const RunRecord& DatasetManifest::run(const std::string& id) const {
  for (const auto& r : runs) {
    if (r.id == id) return r;
  }
  throw ConfigError("manifest: no run with id '" + id + "'");
}

fireca::ScenarioConfig DatasetManifest::scenario(fireca::IgnitionKind pattern, double speed, double direction,
                                                 std::uint64_t seed) const {
  fireca::ScenarioConfig c;
  c.rows = rows;
  c.cols = cols;
  c.steps = steps;
  c.wind_speed = speed;
  c.wind_direction = direction;
  c.ignition = fireca::build_ignition_pattern(pattern, rows, cols, pattern_seed);
  c.seed = seed;
  c.initial_fuel = initial_fuel;
  c.initial_moisture = initial_moisture;
  c.spread = spread;
  return c;
}

fireca::ScenarioConfig DatasetManifest::scenario(const RunRecord& r) const {
  return scenario(r.pattern, r.wind_speed, r.wind_direction, r.seed);
}

std::string DatasetManifest::to_json() const {
  json j;
  j["rows"] = rows;
  j["cols"] = cols;
  j["steps"] = steps;
  j["pattern_seed"] = pattern_seed;
  j["initial_fuel"] = initial_fuel;
  j["initial_moisture"] = initial_moisture;
  j["spread"] = {{"p0", spread.p0}, {"alpha", spread.alpha}, {"dry_rate", spread.dry_rate},
                 {"burn_rate", spread.burn_rate}};
  j["source_setting"] = {{"wind_speed", source_speed}, {"wind_direction", source_direction}};
  j["runs"] = json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"id", r.id},
                         {"pattern", std::string(fireca::kind_name(r.pattern))},
                         {"wind_speed", r.wind_speed},
                         {"wind_direction", r.wind_direction},
                         {"seed", r.seed},
                         {"file", r.file}});
  }
  j["split"] = {{"train", train}, {"test", test}};
  j["sources"] = json::object();
  for (const auto& [k, f] : sources) j["sources"][std::string(fireca::kind_name(k))] = f;
  j["scaling"] = {{"speed_min", scaling.speed_min},
                  {"speed_max", scaling.speed_max},
                  {"direction_min", scaling.direction_min},
                  {"direction_max", scaling.direction_max}};
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.rows = j.at("rows");
    m.cols = j.at("cols");
    m.steps = j.at("steps");
    m.pattern_seed = j.at("pattern_seed");
    m.initial_fuel = j.at("initial_fuel");
    m.initial_moisture = j.at("initial_moisture");
    const auto& s = j.at("spread");
    m.spread = {s.at("p0"), s.at("alpha"), s.at("dry_rate"), s.at("burn_rate")};
    m.source_speed = j.at("source_setting").at("wind_speed");
    m.source_direction = j.at("source_setting").at("wind_direction");
    for (const auto& r : j.at("runs")) {
      m.runs.push_back({r.at("id"), kind_from(r.at("pattern")), r.at("wind_speed"), r.at("wind_direction"),
                        r.at("seed"), r.at("file")});
    }
    m.train = j.at("split").at("train").get<std::vector<std::string>>();
    m.test = j.at("split").at("test").get<std::vector<std::string>>();
    for (const auto& [k, f] : j.at("sources").items()) m.sources[kind_from(k)] = f.get<std::string>();
    const auto& sc = j.at("scaling");
    m.scaling = {sc.at("speed_min"), sc.at("speed_max"), sc.at("direction_min"), sc.at("direction_max")};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  const auto text = to_json();
  container::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  const auto bytes = container::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

void split_runs(DatasetManifest& m, double train_fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& r : m.runs) ids.push_back(r.id);
  std::mt19937_64 rng(splitmix64(seed ^ 0x5eed5171ULL));
  // Fisher-Yates with our own index draw so the split is identical across
  // standard libraries.
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(fireca::uniform01(rng) * static_cast<double>(i));
    std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
  m.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.test.begin(), m.test.end());
}

Scaling fit_scaling(const DatasetManifest& m) {
  Scaling s;
  bool first = true;
  for (const auto& id : m.train) {
    const auto& r = m.run(id);
    if (first) {
      s = {r.wind_speed, r.wind_speed, r.wind_direction, r.wind_direction};
      first = false;
      continue;
    }
    s.speed_min = std::min(s.speed_min, r.wind_speed);
    s.speed_max = std::max(s.speed_max, r.wind_speed);
    s.direction_min = std::min(s.direction_min, r.wind_direction);
    s.direction_max = std::max(s.direction_max, r.wind_direction);
  }
  return s;
}

double min_max(double v, double lo, double hi, bool* clamped) {
  if (clamped) *clamped = v < lo || v > hi;
  if (!(hi > lo)) return 0.0;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

DatasetManifest generate_dataset(const PipelineConfig& config, const std::filesystem::path& data_dir) {
  config.validate();
  DatasetManifest m;
  m.rows = config.rows;
  m.cols = config.cols;
  m.steps = config.steps;
  m.pattern_seed = splitmix64(config.seed ^ 0xa11a1ULL);
  m.initial_fuel = config.initial_fuel;
  m.initial_moisture = config.initial_moisture;
  m.spread = config.spread;
  m.source_speed = config.source_speed;
  m.source_direction = config.source_direction;

  for (auto kind : config.patterns) {
    for (double speed : config.speeds) {
      for (double dir : config.directions) {
        const std::size_t index = m.runs.size();
        const auto id = run_id(index);
        m.runs.push_back({id, kind, speed, dir, splitmix64(config.seed * 1000003ULL + index), "run_" + id + ".embr"});
      }
    }
  }
  if (m.runs.empty()) return m;

  for (const auto& r : m.runs) {
    container::save(data_dir / r.file, fireca::simulate(m.scenario(r)).to_tensor());
  }
  std::size_t k = 0;
  for (auto kind : config.patterns) {
    if (m.sources.count(kind)) continue;
    const auto file = "source_" + std::string(fireca::kind_name(kind)) + ".embr";
    const auto cfg = m.scenario(kind, m.source_speed, m.source_direction, splitmix64(config.seed ^ (0x50c0ULL + k++)));
    container::save(data_dir / file, fireca::simulate(cfg).to_tensor());
    m.sources[kind] = file;
  }
  split_runs(m, config.train_fraction, config.seed);
  m.scaling = fit_scaling(m);
  m.save(data_dir / "manifest.json");
  return m;
}

Tensor assemble_channels(const fireca::ScenarioConfig& run, const DatasetManifest& manifest,
                         const std::map<fireca::IgnitionKind, FuelFieldSequence>& sources) {
  const auto kind = run.ignition.kind;
  auto it = sources.find(kind);
  if (it == sources.end()) {
    throw ConfigError("assemble_channels: no source run for pattern " + std::string(fireca::kind_name(kind)));
  }
  const auto& src = it->second;
  if (src.steps != run.steps || src.rows != run.rows || src.cols != run.cols) {
    throw ConfigError("assemble_channels: source run for " + std::string(fireca::kind_name(kind)) +
                      " has different dims than the scenario");
  }
  const auto& sc = manifest.scaling;
  bool clamp_speed = false, clamp_dir = false;
  const double speed = min_max(run.wind_speed, sc.speed_min, sc.speed_max, &clamp_speed);
  const double dir = min_max(run.wind_direction, sc.direction_min, sc.direction_max, &clamp_dir);
  if (clamp_speed) std::clog << "warning: wind speed " << run.wind_speed << " outside the training range, clamped\n";
  if (clamp_dir) {
    std::clog << "warning: wind direction " << run.wind_direction << " outside the training range, clamped\n";
  }

  const std::size_t frame = run.rows * run.cols;
  std::vector<double> lit_at(frame, std::numeric_limits<double>::infinity());
  for (const auto& e : run.ignition.schedule) {
    auto& v = lit_at[e.row * run.cols + e.col];
    v = std::min(v, static_cast<double>(e.step));
  }
  std::vector<double> x(run.steps * frame * 4);
  for (std::size_t t = 0; t < run.steps; ++t) {
    for (std::size_t i = 0; i < frame; ++i) {
      double* px = &x[(t * frame + i) * 4];
      px[0] = speed;
      px[1] = dir;
      px[2] = lit_at[i] <= static_cast<double>(t) ? 1.0 : 0.0;
      px[3] = src.values[t * frame + i];
    }
  }
  return Tensor::from({run.steps, run.rows, run.cols, 4}, std::move(x));
}

Dataset Dataset::load(const std::filesystem::path& data_dir) {
  Dataset d;
  d.dir_ = data_dir;
  d.manifest_ = DatasetManifest::load(data_dir / "manifest.json");
  const auto& m = d.manifest_;
  for (const auto& r : m.runs) {
    auto seq = FuelFieldSequence::from_tensor(container::load(data_dir / r.file));
    if (seq.steps != m.steps || seq.rows != m.rows || seq.cols != m.cols) {
      throw ConfigError("dataset: " + r.file + " does not match the manifest dims");
    }
    d.sequences_.emplace(r.id, std::move(seq));
  }
  for (const auto& [kind, file] : m.sources) {
    d.sources_.emplace(kind, FuelFieldSequence::from_tensor(container::load(data_dir / file)));
  }
  return d;
}

const FuelFieldSequence& Dataset::sequence(const std::string& id) const {
  auto it = sequences_.find(id);
  if (it == sequences_.end()) throw ConfigError("dataset: no run with id '" + id + "'");
  return it->second;
}

Tensor Dataset::inputs(const fireca::ScenarioConfig& config) const {
  return assemble_channels(config, manifest_, sources_);
}

Tensor Dataset::inputs(const std::string& id) const { return inputs(manifest_.scenario(manifest_.run(id))); }

}  // namespace ember::dataset
