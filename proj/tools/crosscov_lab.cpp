#include "crosscov/cli.hpp"

int main(int argc, char** argv) { return crosscov::cli::main_entry(argc, argv); }
