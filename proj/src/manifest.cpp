#include "curriculab/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include <openssl/evp.h>

#include "curriculab/error.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab {

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &length) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-1 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream content;
  content << in.rdbuf();
  return git_blob_hash(content.str());
}

std::string manifest_timestamp() {
  std::time_t t = 0;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  const auto parsed = epoch ? parse_double(epoch) : std::nullopt;
  if (parsed && *parsed >= 0)
    t = static_cast<std::time_t>(*parsed);
  else
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&t, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

namespace {

nlohmann::ordered_json entries_json(const std::vector<ManifestEntry>& entries) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) arr.push_back({{"path", e.path}, {"sha1", e.hash}});
  return arr;
}

std::vector<ManifestEntry> entries_from(const nlohmann::json& arr) {
  std::vector<ManifestEntry> out;
  for (const auto& e : arr) out.push_back({e.at("path").get<std::string>(), e.at("sha1").get<std::string>()});
  return out;
}

}  // namespace

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["command"] = manifest.command;
  j["timestamp"] = manifest.timestamp;
  j["inputs"] = entries_json(manifest.inputs);
  j["params"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : manifest.params) j["params"][k] = v;
  j["outputs"] = entries_json(manifest.outputs);
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.inputs = entries_from(j.at("inputs"));
    for (const auto& [k, v] : j.at("params").items()) m.params[k] = v.get<std::string>();
    m.outputs = entries_from(j.at("outputs"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what(), 0);
  }
}

std::vector<std::string> verify_manifest_outputs(const RunManifest& manifest, const std::filesystem::path& root) {
  std::vector<std::string> bad;
  for (const auto& e : manifest.outputs) {
    const auto path = root / e.path;
    if (!std::filesystem::exists(path) || git_blob_hash_file(path) != e.hash) bad.push_back(e.path);
  }
  return bad;
}

std::map<std::string, std::string> parse_checksum_list(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto sep = line.find("  ");
    if (sep != 40) throw ParseError("expected '<40-hex sha1>  <path>'", line_no);
    out[std::string(trim(line.substr(sep)))] = std::string(line.substr(0, sep));
  }
  return out;
}

}  // namespace curriculab
