#include "netside/cli.hpp"

int main(int argc, char** argv) { return netside::run_cli(argc, argv); }
