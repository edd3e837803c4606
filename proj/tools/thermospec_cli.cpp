#include <vector>
#include <string>

#include "thermospec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return thermospec::run_cli(args);
}
