#include <iostream>

#include "uvcloth/app/cli.hpp"

int main(int argc, char** argv) {
  return uvcloth::app::run_command({argv + 1, argv + argc}, std::cout, std::cerr);
}
