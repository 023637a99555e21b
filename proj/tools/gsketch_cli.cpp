#include "gsketch/cli.hpp"

int main(int argc, char** argv) { return gsketch::cli::run(argc, argv); }
