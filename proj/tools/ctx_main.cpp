#include <string>
#include <vector>

#include "ctx/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ctx::run_command(args);
}
