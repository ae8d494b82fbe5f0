#include "physio/cli/commands.hpp"

int main(int argc, char** argv) { return physio::cli::run(argc, argv); }
