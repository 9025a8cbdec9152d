#include "cli.hpp"

int main(int argc, char** argv) { return brainnet::cli::run(argc, argv); }
