#include "ptdt/cli/cli.hpp"

int main(int argc, char** argv) { return ptdt::cli::run(argc, argv); }
