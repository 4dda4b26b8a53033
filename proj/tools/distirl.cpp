#include <string>
#include <vector>

#include "distirl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return distirl::cli::run(args);
}
