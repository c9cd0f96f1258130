#include "tklab/cli_core.hpp"

int main(int argc, char** argv) { return tklab::cli::cli_main(argc, argv); }
