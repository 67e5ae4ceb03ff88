#include "fiberprobe/cli.hpp"

int main(int argc, char** argv) { return fiberprobe::cli::run(argc, argv); }
