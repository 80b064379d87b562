#include <string>
#include <vector>

#include "fairfal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairfal::cli::run(std::move(args));
}
