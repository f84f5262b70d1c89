#include <string>
#include <vector>

#include "ifkit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ifkit::dispatch(args);
}
