#include <iostream>
#include <string>
#include <vector>

#include "nowcast/cli.hpp"
#include "nowcast/parallel.hpp"

int main(int argc, char** argv) {
  nowcast::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return nowcast::cli::dispatch(args, std::cout, std::cerr);
}
