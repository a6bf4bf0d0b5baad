#include "chunkforge/cli.hpp"

int main(int argc, char** argv) { return chunkforge::run_cli(argc, argv); }
