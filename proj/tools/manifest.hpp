#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ecdiff::cli {

// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

// Record of one command run, written next to its outputs.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config, unsigned long long seed);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  // Stamps the wall time and writes <dir>/manifest.json atomically.
  void write(const std::filesystem::path& dir);

 private:
  std::string command_;
  nlohmann::json config_;
  unsigned long long seed_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace ecdiff::cli
