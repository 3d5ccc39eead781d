#include "iay/cli.hpp"

int main(int argc, char** argv) { return iay::run_cli(argc, argv); }
