#include "anthrofit/cli.h"

#include <iostream>

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return anthrofit::cli::run(args, std::cout, std::cerr);
}
