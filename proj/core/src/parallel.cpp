#include "pshadow/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace pshadow {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PSHADOW_THREADS")) {
    unsigned v = 0;
    const auto r = std::from_chars(env, env + std::strlen(env), v);
    if (r.ec == std::errc() && v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace pshadow
