#pragma once

// Plain "key = value" configuration files ('#' starts a comment) and the
// pipeline settings they map onto.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ember/emulator.hpp"
#include "ember/fireca.hpp"
#include "ember/losses.hpp"

namespace ember {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Sorted "key = value" lines.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

/// "32x32" -> {32, 32}. Throws ConfigError.
std::pair<std::size_t, std::size_t> parse_grid(const std::string& text);

struct PipelineConfig {
  // dataset
  std::size_t rows = 32;
  std::size_t cols = 32;
  std::size_t steps = 20;
  std::vector<fireca::IgnitionKind> patterns{std::begin(fireca::kAllIgnitionKinds),
                                             std::end(fireca::kAllIgnitionKinds)};
  std::vector<double> speeds{1.0, 4.0, 8.0};
  std::vector<double> directions{230.0, 270.0, 310.0, 330.0};
  double source_speed = 1.0;
  double source_direction = 230.0;
  double train_fraction = 0.5;
  double initial_fuel = 0.7;
  double initial_moisture = 1.0;
  fireca::SpreadParams spread;
  std::uint64_t seed = 1;

  // model
  emulator::Mode mode = emulator::Mode::PGCLPlus;
  std::size_t hidden = 8;
  std::size_t layers = 4;
  double sigma_floor = 0.01;
  bool bn_running_at_inference = false;  // bn_inference = running | batch

  // training
  std::size_t epochs = 40;
  double lr = 0.001;
  losses::LossWeights weights;

  // evaluation and serving
  std::size_t timing_repetitions = 10;
  std::filesystem::path out = "ember_out";
  int port = 8080;

  /// Unknown keys raise ConfigError so typos do not pass silently.
  static PipelineConfig from(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  void validate() const;
};

}  // namespace ember
