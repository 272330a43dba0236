#include <string>
#include <vector>

#include "gbtrack/cli.hpp"

int main(int argc, char** argv) {
  return gbtrack::cli::run(std::vector<std::string>(argv, argv + argc));
}
