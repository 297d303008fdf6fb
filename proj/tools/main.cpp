#include "../src/cli.hpp"

int main(int argc, char** argv) { return slafc::cli_main(argc, argv); }
