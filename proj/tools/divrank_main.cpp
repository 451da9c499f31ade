#include "divrank/cli.hpp"

int main(int argc, char** argv) { return divrank::run_command(argc, argv); }
