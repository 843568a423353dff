#include "ember/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "ember/errors.hpp"

namespace ember {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: " + key + " = '" + text + "' is not a number");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "grid", "steps", "patterns", "speeds", "directions", "source_speed", "source_direction",
      "train_fraction", "initial_fuel", "initial_moisture", "p0", "alpha", "dry_rate", "burn_rate", "seed",
      "mode", "hidden", "layers", "sigma_floor", "bn_inference", "epochs", "lr", "lambda_ft", "lambda_ros", "lambda_ba",
      "lambda_burned", "lambda_unburned", "lambda_gram", "lambda_pp", "use_ft", "use_ros", "use_ba",
      "use_burned", "use_unburned", "use_gram", "use_pp", "eps", "eps_b", "eps_u", "error_norm", "per_cell", "pp_normalise",
      "timing_repetitions", "out", "port"};
  return keys;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config: " + key + " = '" + s + "' is not an integer");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ConfigError("config: " + key + " = '" + s + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : split_list(it->second);
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw ConfigError("grid: expected MxP, got '" + text + "'");
  std::size_t m = 0, p = 0;
  const auto a = trim(std::string_view(text).substr(0, x));
  const auto b = trim(std::string_view(text).substr(x + 1));
  auto r1 = std::from_chars(a.data(), a.data() + a.size(), m);
  auto r2 = std::from_chars(b.data(), b.data() + b.size(), p);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != a.data() + a.size() ||
      r2.ptr != b.data() + b.size() || m == 0 || p == 0) {
    throw ConfigError("grid: expected MxP with positive integers, got '" + text + "'");
  }
  return {m, p};
}

PipelineConfig PipelineConfig::from(const KeyValueConfig& kv) {
  for (const auto& [k, v] : kv.values()) {
    if (!known_keys().count(k)) throw ConfigError("config: unknown key '" + k + "'");
  }
  PipelineConfig c;
  if (kv.has("grid")) std::tie(c.rows, c.cols) = parse_grid(kv.get_string("grid", ""));
  auto nonneg = [&](const char* key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("config: ") + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.steps = nonneg("steps", c.steps);
  if (kv.has("patterns")) {
    c.patterns.clear();
    for (const auto& name : kv.get_strings("patterns", {})) {
      auto k = fireca::parse_kind(name);
      if (!k) throw ConfigError("config: unknown ignition pattern '" + name + "'");
      c.patterns.push_back(*k);
    }
  }
  c.speeds = kv.get_doubles("speeds", c.speeds);
  c.directions = kv.get_doubles("directions", c.directions);
  c.source_speed = kv.get_double("source_speed", c.source_speed);
  c.source_direction = kv.get_double("source_direction", c.source_direction);
  c.train_fraction = kv.get_double("train_fraction", c.train_fraction);
  c.initial_fuel = kv.get_double("initial_fuel", c.initial_fuel);
  c.initial_moisture = kv.get_double("initial_moisture", c.initial_moisture);
  c.spread.p0 = kv.get_double("p0", c.spread.p0);
  c.spread.alpha = kv.get_double("alpha", c.spread.alpha);
  c.spread.dry_rate = kv.get_double("dry_rate", c.spread.dry_rate);
  c.spread.burn_rate = kv.get_double("burn_rate", c.spread.burn_rate);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));

  if (kv.has("mode")) {
    auto m = emulator::parse_mode(kv.get_string("mode", ""));
    if (!m) throw ConfigError("config: mode must be cl, pgcl or pgcl+");
    c.mode = *m;
  }
  c.hidden = nonneg("hidden", c.hidden);
  c.layers = nonneg("layers", c.layers);
  c.sigma_floor = kv.get_double("sigma_floor", c.sigma_floor);
  if (kv.has("bn_inference")) {
    const auto bn = kv.get_string("bn_inference", "");
    if (bn != "batch" && bn != "running") throw ConfigError("config: bn_inference must be batch or running");
    c.bn_running_at_inference = bn == "running";
  }
  c.epochs = nonneg("epochs", c.epochs);
  c.lr = kv.get_double("lr", c.lr);

  auto& w = c.weights;
  w.ft = kv.get_double("lambda_ft", w.ft);
  w.ros = kv.get_double("lambda_ros", w.ros);
  w.ba = kv.get_double("lambda_ba", w.ba);
  w.burned = kv.get_double("lambda_burned", w.burned);
  w.unburned = kv.get_double("lambda_unburned", w.unburned);
  w.gram = kv.get_double("lambda_gram", w.gram);
  w.pp = kv.get_double("lambda_pp", w.pp);
  w.use_ft = kv.get_bool("use_ft", w.use_ft);
  w.use_ros = kv.get_bool("use_ros", w.use_ros);
  w.use_ba = kv.get_bool("use_ba", w.use_ba);
  w.use_burned = kv.get_bool("use_burned", w.use_burned);
  w.use_unburned = kv.get_bool("use_unburned", w.use_unburned);
  w.use_gram = kv.get_bool("use_gram", w.use_gram);
  w.use_pp = kv.get_bool("use_pp", w.use_pp);
  w.eps = kv.get_double("eps", w.eps);
  w.eps_b = kv.get_double("eps_b", w.eps_b);
  w.eps_u = kv.get_double("eps_u", w.eps_u);
  const auto norm = kv.get_string("error_norm", "squared");
  if (norm == "squared") {
    w.norm = losses::ErrorNorm::Squared;
  } else if (norm == "absolute") {
    w.norm = losses::ErrorNorm::Absolute;
  } else {
    throw ConfigError("config: error_norm must be squared or absolute");
  }
  w.per_cell = kv.get_bool("per_cell", w.per_cell);
  if (kv.has("pp_normalise")) {
    const auto pp = kv.get_string("pp_normalise", "");
    if (pp != "cells" && pp != "none") throw ConfigError("config: pp_normalise must be cells or none");
    w.pp_per_cell = pp == "cells";
  }

  c.timing_repetitions = nonneg("timing_repetitions", c.timing_repetitions);
  c.out = kv.get_string("out", c.out.string());
  c.port = static_cast<int>(kv.get_int("port", c.port));
  c.validate();
  return c;
}

KeyValueConfig PipelineConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("grid", std::to_string(rows) + "x" + std::to_string(cols));
  kv.set("steps", std::to_string(steps));
  std::string names;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    names += (i ? "," : "") + std::string(fireca::kind_name(patterns[i]));
  }
  kv.set("patterns", names);
  kv.set("speeds", join_doubles(speeds));
  kv.set("directions", join_doubles(directions));
  kv.set("source_speed", format_double(source_speed));
  kv.set("source_direction", format_double(source_direction));
  kv.set("train_fraction", format_double(train_fraction));
  kv.set("initial_fuel", format_double(initial_fuel));
  kv.set("initial_moisture", format_double(initial_moisture));
  kv.set("p0", format_double(spread.p0));
  kv.set("alpha", format_double(spread.alpha));
  kv.set("dry_rate", format_double(spread.dry_rate));
  kv.set("burn_rate", format_double(spread.burn_rate));
  kv.set("seed", std::to_string(seed));
  kv.set("mode", std::string(emulator::mode_name(mode)));
  kv.set("hidden", std::to_string(hidden));
  kv.set("layers", std::to_string(layers));
  kv.set("sigma_floor", format_double(sigma_floor));
  kv.set("bn_inference", bn_running_at_inference ? "running" : "batch");
  kv.set("epochs", std::to_string(epochs));
  kv.set("lr", format_double(lr));
  kv.set("lambda_ft", format_double(weights.ft));
  kv.set("lambda_ros", format_double(weights.ros));
  kv.set("lambda_ba", format_double(weights.ba));
  kv.set("lambda_burned", format_double(weights.burned));
  kv.set("lambda_unburned", format_double(weights.unburned));
  kv.set("lambda_gram", format_double(weights.gram));
  kv.set("lambda_pp", format_double(weights.pp));
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  kv.set("use_ft", b(weights.use_ft));
  kv.set("use_ros", b(weights.use_ros));
  kv.set("use_ba", b(weights.use_ba));
  kv.set("use_burned", b(weights.use_burned));
  kv.set("use_unburned", b(weights.use_unburned));
  kv.set("use_gram", b(weights.use_gram));
  kv.set("use_pp", b(weights.use_pp));
  kv.set("eps", format_double(weights.eps));
  kv.set("eps_b", format_double(weights.eps_b));
  kv.set("eps_u", format_double(weights.eps_u));
  kv.set("error_norm", weights.norm == losses::ErrorNorm::Squared ? "squared" : "absolute");
  kv.set("per_cell", b(weights.per_cell));
  kv.set("pp_normalise", weights.pp_per_cell ? "cells" : "none");
  kv.set("timing_repetitions", std::to_string(timing_repetitions));
  kv.set("out", out.string());
  kv.set("port", std::to_string(port));
  return kv;
}

void PipelineConfig::validate() const {
  if (rows == 0 || cols == 0 || steps == 0) throw ConfigError("config: grid and steps must be positive");
  if (hidden == 0 || layers == 0) throw ConfigError("config: hidden and layers must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("config: train_fraction must lie in (0, 1)");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (timing_repetitions == 0) throw ConfigError("config: timing_repetitions must be >= 1");
  for (double s : speeds) {
    if (!(s >= 0.0)) throw ConfigError("config: speeds must be >= 0");
  }
  for (double d : directions) {
    if (!(d >= 0.0 && d < 360.0)) throw ConfigError("config: directions must lie in [0, 360)");
  }
  weights.validate();
}

}  // namespace ember
