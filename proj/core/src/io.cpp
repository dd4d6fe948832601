#include "ecdiff/io.hpp"

#include <fstream>
#include <string>

#include "ecdiff/errors.hpp"

namespace ecdiff {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace ecdiff
