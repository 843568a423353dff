#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "ember/config.hpp"

namespace ember::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ember_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// 2 patterns x 2 speeds x 2 directions on a 10x10 grid, 12 frames.
inline PipelineConfig tiny_config(const std::filesystem::path& out) {
  PipelineConfig c;
  c.rows = 10;
  c.cols = 10;
  c.steps = 12;
  c.patterns = {fireca::IgnitionKind::StripSouth, fireca::IgnitionKind::Inward};
  c.speeds = {1.0, 8.0};
  c.directions = {230.0, 310.0};
  c.hidden = 3;
  c.layers = 2;
  c.epochs = 2;
  c.timing_repetitions = 2;
  c.out = out;
  return c;
}

}  // namespace ember::testing
