#include "civs/cli.hpp"

int main(int argc, char** argv) { return civs::run_cli(argc, argv); }
