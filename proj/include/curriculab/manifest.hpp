#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace curriculab {

/// Git blob id: SHA-1 of "blob <size>\0" followed by the content, in hex.
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;
  std::string hash;
};

struct RunManifest {
  std::string command;
  std::vector<ManifestEntry> inputs;
  std::map<std::string, std::string> params;
  std::vector<ManifestEntry> outputs;  // paths relative to the output directory
  std::string timestamp;
};

/// UTC ISO-8601 time from SOURCE_DATE_EPOCH when set, else the clock.
std::string manifest_timestamp();

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

/// Paths (relative to `root`) whose recorded hash differs from the file on
/// disk, including missing files.
std::vector<std::string> verify_manifest_outputs(const RunManifest& manifest, const std::filesystem::path& root);

/// Data checksum list: one `<hash>  <relative path>` line per file.
std::map<std::string, std::string> parse_checksum_list(std::string_view text);

}  // namespace curriculab
