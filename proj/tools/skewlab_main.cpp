#include "skewlab/cli.hpp"

int main(int argc, char** argv) { return skewlab::run_command(argc, argv); }
