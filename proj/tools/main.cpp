#include "cli.hpp"

int main(int argc, char** argv) { return cicmap::cli::run(argc, argv); }
