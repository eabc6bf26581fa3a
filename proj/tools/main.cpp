#include <malloc.h>

#include "nsf/cli.hpp"

int main(int argc, char** argv) {
  // Training allocates and frees tape buffers of tens of megabytes each step;
  // keep them on the heap instead of mapping and unmapping every time.
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
  return nsf::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
