#include "exposcan/fsutil.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "exposcan/errors.hpp"

namespace exposcan {

namespace fs = std::filesystem;

void write_file_atomically(const fs::path &path, const std::string &content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot replace " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<fs::path> find_layout_files(const fs::path &root, std::string_view name)
{
    std::vector<fs::path> files;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        return files;
    }
    for (const auto &country_dir : fs::directory_iterator(root)) {
        if (!country_dir.is_directory()) {
            continue;
        }
        for (const auto &service_dir : fs::directory_iterator(country_dir.path())) {
            fs::path f = service_dir.path() / std::string(name);
            if (service_dir.is_directory() && fs::is_regular_file(f)) {
                files.push_back(f);
            }
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

void ensure_directory(const fs::path &dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

} // namespace exposcan
