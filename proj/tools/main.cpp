#include "cli.hpp"

int main(int argc, char** argv) { return modec::cli::run(argc, argv); }
