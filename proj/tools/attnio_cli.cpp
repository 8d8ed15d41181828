#include "attnio/cli.hpp"

int main(int argc, char** argv) { return attnio::cli::run_cli(argc, argv); }
