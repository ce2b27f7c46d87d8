#include "maglens/cli.hpp"

int main(int argc, char** argv) { return maglens::run_cli(argc, argv); }
