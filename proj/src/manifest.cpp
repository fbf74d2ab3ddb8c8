#include "pfn/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pfn/error.hpp"

namespace pfn {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1)
    throw NumericError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ParseError("sha256: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["subcommand"] = m.subcommand;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.config.values) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json arts = nlohmann::ordered_json::object();
  for (const auto& [name, hash] : m.artifacts) arts[name] = hash;
  j["artifacts"] = arts;

  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw ParseError("manifest: cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw ParseError("manifest: write failed for " + path);
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ParseError("manifest: cannot open " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("manifest: bad JSON in " + path + ": " + e.what());
  }
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& [k, v] : j.at("config").items())
      m.config.set(k, v.get<std::string>());
    for (const auto& [k, v] : j.at("artifacts").items())
      m.artifacts.push_back({k, v.get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest: missing or mistyped field in " + path + ": " +
                     e.what());
  }
  return m;
}

}  // namespace pfn
