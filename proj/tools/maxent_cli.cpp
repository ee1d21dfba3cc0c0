#include "maxent/cli.hpp"

int main(int argc, char** argv) { return maxent::cli_main(argc, argv); }
