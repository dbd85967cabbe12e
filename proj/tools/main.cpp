#include "chaoscorr/cli.hpp"

int main(int argc, char** argv) { return chaoscorr::cli::run_cli(argc, argv); }
