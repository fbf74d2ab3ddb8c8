#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pfn/config.hpp"

namespace pfn {

inline constexpr const char* kToolVersion = "pfn 1.0.0";

// Reproduction record for one run directory: the resolved config plus seed
// fully determine the outputs, whose hashes are filled in after they are
// written. Volatile files (wall-clock timings) are never registered.
struct RunManifest {
  std::string subcommand;
  std::string tool_version = kToolVersion;
  uint64_t seed = 0;
  KvConfig config;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name, sha256
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// JSON with fixed key order: subcommand, tool_version, seed, config
// (sorted keys), artifacts (insertion order).
void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace pfn
