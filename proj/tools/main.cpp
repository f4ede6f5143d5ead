#include <iostream>

#include "rtc_cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rtc::cli::run_cli(args, std::cout, std::cerr);
}
