#include "pbicgs/cli.hpp"

int main(int argc, char** argv) { return pbicgs::run_cli(argc, argv); }
