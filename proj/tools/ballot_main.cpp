#include "ballot/cli.hpp"

int main(int argc, char** argv) { return ballot::cli_main(argc, argv); }
