#include "spotune/commands.hpp"

int main(int argc, char** argv) { return spotune::cli::run(argc, argv); }
