#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace exposcan {

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomically(const std::filesystem::path &path, const std::string &content);

std::string read_file(const std::filesystem::path &path);

// Every <root>/<COUNTRY>/<service>/<name> that exists, sorted.
std::vector<std::filesystem::path> find_layout_files(const std::filesystem::path &root,
    std::string_view name);

void ensure_directory(const std::filesystem::path &dir);

} // namespace exposcan
