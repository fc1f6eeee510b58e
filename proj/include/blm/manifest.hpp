#pragma once

// Reproducibility stamp written beside every CLI output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace blm {

std::string_view tool_version() noexcept;

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

struct FileDigest {
  std::string path;
  std::uint64_t bytes = 0;
  std::string sha256;
};

FileDigest digest_file(const std::filesystem::path& path);

// No timestamps or host data: two runs with the same configuration produce
// byte-identical manifests.
struct RunManifest {
  std::string tool_version;
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// "<output>.manifest.json"
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace blm
