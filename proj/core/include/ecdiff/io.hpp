#pragma once

#include <filesystem>
#include <string_view>

namespace ecdiff {

// Writes to a sibling temporary file and renames it over `path`, creating
// parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ecdiff
