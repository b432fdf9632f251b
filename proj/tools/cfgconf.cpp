#include "cfgconf/cli.hpp"

int main(int argc, char** argv) { return cfgconf::run_cli(argc, argv); }
