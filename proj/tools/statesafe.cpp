#include <iostream>

#include "statesafe/cli.hpp"

int main(int argc, char** argv) {
  const auto res = statesafe::cli::run_cli(argc, argv);
  std::cout << res.out;
  std::cerr << res.err;
  return res.code;
}
