#include "commands.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Every forward pass allocates and frees tensors of a few MB. Above the
  // mmap threshold glibc maps and unmaps them each time, and page faults then
  // dominate the run time of small graphs.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return kcgn::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
