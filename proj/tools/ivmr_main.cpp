#include "ivmr/cli.hpp"

int main(int argc, char** argv) { return ivmr::run_cli(argc, argv); }
