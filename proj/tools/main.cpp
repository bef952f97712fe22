#include "lpp/cli.hpp"

int main(int argc, char** argv) { return lpp::cli::run_command(argc, argv); }
