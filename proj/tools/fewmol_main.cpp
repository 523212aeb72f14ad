#include "fewmol/cli.hpp"

int main(int argc, char** argv) { return fewmol::cli::run(argc, argv); }
