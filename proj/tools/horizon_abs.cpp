#include "habs/cli.hpp"

int main(int argc, char** argv) { return habs::cli::run(argc, argv); }
