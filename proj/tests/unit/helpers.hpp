#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "sentinel/kpm_data.hpp"

namespace testing {

inline std::filesystem::path fixture_dir() { return SENTINEL_FIXTURE_DIR; }
inline std::filesystem::path data_dir() { return SENTINEL_DATA_DIR; }
inline std::filesystem::path schema_dir() { return SENTINEL_SCHEMA_DIR; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sentinel-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline sentinel::KpmRecord record(std::string ue, std::int64_t ts, double value, int label = 0,
                                  int day = 1) {
  sentinel::KpmRecord r;
  r.ue_id = std::move(ue);
  r.timestamp = ts;
  r.features.fill(value);
  r.label = label;
  r.day = day;
  return r;
}

inline sentinel::Window random_window(std::mt19937_64& rng, std::size_t steps, int label = 0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  sentinel::Window w;
  w.steps = steps;
  w.label = label;
  w.values.resize(steps * sentinel::kNumFeatures);
  for (auto& v : w.values) v = u(rng);
  return w;
}

}  // namespace testing
