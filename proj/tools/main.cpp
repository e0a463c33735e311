#include <string>
#include <vector>

#include "diversify/cli.hpp"

int main(int argc, char** argv) {
  return diversify::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
