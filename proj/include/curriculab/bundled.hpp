#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace curriculab {

/// Files compiled in from the project's data/ tree, keyed by relative path
/// such as "designs/freeway.csv" or "tables/freeway/expert.csv".
std::vector<std::string_view> bundled_paths();

/// Contents of a bundled file; throws Error naming known paths if absent.
std::string_view bundled_file(std::string_view relative_path);

bool has_bundled_file(std::string_view relative_path);

}  // namespace curriculab
