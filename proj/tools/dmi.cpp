#include "dmi/cli/commands.hpp"

int main(int argc, char** argv) { return dmi::cli::run(argc, argv); }
