#include <vector>

#include "artrec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return artrec::cli::run(args);
}
