#include "asvgp/cli.hpp"

int main(int argc, char** argv) { return asvgp::cli::run(argc, argv); }
