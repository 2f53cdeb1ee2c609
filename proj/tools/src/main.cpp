#include <iostream>

#include "gesturegan_app/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return gesturegan::app::run(args, std::cout, std::cerr);
}
