#include <string>
#include <vector>

#include "hatesense/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hatesense::cli::run(args);
}
