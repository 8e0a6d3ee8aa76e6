#include "expandernet/cli.hpp"

int main(int argc, char** argv) { return expandernet::cli::run(argc, argv); }
