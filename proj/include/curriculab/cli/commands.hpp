#pragma once

// Command-line frontend: ingest, anova, transfer, strategies, run-mini and
// report. Exit codes: 0 success, 1 failed check, 2 usage or input error.

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "curriculab/design.hpp"
#include "curriculab/scores.hpp"

namespace curriculab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Runs the CLI with args[0] as the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a file, or a compiled-in one when the path starts with "bundled:".
std::string read_input(std::string_view path);

/// Bundled data directory of a title ("SpaceInvaders" -> "space_invaders").
std::string bundled_dir(std::string_view title);

/// The three published titles with bundled score tables.
std::vector<std::string> bundled_titles();

/// Transfer matrix rebuilt from a title's bundled raw grid and expert table;
/// sources missing from the grid's default column are filled from the
/// bundled zero-shot-from-default table.
TransferMatrix bundled_transfer_matrix(std::string_view title);

/// The published normalized grid, default column filled the same way.
TransferMatrix bundled_published_normalized(std::string_view title);

}  // namespace curriculab::cli
