#pragma once

#include <fstream>
#include <system_error>

#include "pshadow/errors.hpp"

namespace pshadow {

template <typename WriteFn>
void write_atomically(const std::filesystem::path& path, WriteFn&& write) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + partial.string());
    write(out);
    out.flush();
    if (!out) throw DataError("write failed for " + partial.string());
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) throw DataError("cannot move " + partial.string() + " into place: " + ec.message());
}

}  // namespace pshadow
