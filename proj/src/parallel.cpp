#include "penergy/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace penergy {

int default_threads() {
  const char* env = std::getenv("PENERGY_THREADS");
  if (!env) return 1;
  int n = 0;
  auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
  if (ec != std::errc() || *ptr != '\0' || n < 1) return 1;
  return n;
}

}  // namespace penergy
