#include <iostream>

#include "nams/common/alloc.hpp"
#include "nams/harness/cli.hpp"

int main(int argc, char** argv) {
  nams::tune_allocator();
  return nams::harness::run_cli(argc, argv, std::cerr);
}
