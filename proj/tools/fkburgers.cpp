#include "fkburgers/cli.hpp"

int main(int argc, char** argv) { return fkb::cli_main(argc, argv); }
