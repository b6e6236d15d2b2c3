#include "curriculab/bundled.hpp"

#include <string>
#include <utility>

#include "curriculab/error.hpp"

namespace curriculab {
namespace detail {
extern const std::pair<std::string_view, std::string_view> kBundledFiles[];
extern const std::size_t kBundledFileCount;
}  // namespace detail

std::vector<std::string_view> bundled_paths() {
  std::vector<std::string_view> paths;
  for (std::size_t i = 0; i < detail::kBundledFileCount; ++i) paths.push_back(detail::kBundledFiles[i].first);
  return paths;
}

bool has_bundled_file(std::string_view relative_path) {
  for (std::size_t i = 0; i < detail::kBundledFileCount; ++i)
    if (detail::kBundledFiles[i].first == relative_path) return true;
  return false;
}

std::string_view bundled_file(std::string_view relative_path) {
  for (std::size_t i = 0; i < detail::kBundledFileCount; ++i)
    if (detail::kBundledFiles[i].first == relative_path) return detail::kBundledFiles[i].second;
  std::string known;
  for (auto p : bundled_paths()) {
    if (!known.empty()) known += ", ";
    known += p;
  }
  throw Error("no bundled file '" + std::string(relative_path) + "'; known: " + known);
}

}  // namespace curriculab
