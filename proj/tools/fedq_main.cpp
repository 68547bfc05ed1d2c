#include "fedq/cli.hpp"

int main(int argc, char** argv) { return fedq::run_cli(argc, argv); }
