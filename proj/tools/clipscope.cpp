#include "clipscope/cli.hpp"

int main(int argc, char** argv) { return clipscope::cli::run(argc, argv); }
