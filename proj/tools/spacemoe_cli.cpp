#include "spacemoe/cli.hpp"

int main(int argc, char** argv) { return spacemoe::cli_main(argc, argv); }
