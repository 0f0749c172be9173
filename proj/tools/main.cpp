#include "cli.hpp"

int main(int argc, char **argv) { return dlcz::cli::run_cli(argc, argv); }
