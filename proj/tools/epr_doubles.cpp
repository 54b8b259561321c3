#include "epr/cli.hpp"

int main(int argc, char** argv) { return epr::cli::run(argc, argv); }
