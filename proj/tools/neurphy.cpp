#include "neurphy/cli.hpp"

int main(int argc, char** argv) { return neurphy::cli::main(argc, argv); }
