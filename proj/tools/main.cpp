#include "cli.hpp"

int main(int argc, char** argv) { return xbs::cli::run(argc, argv); }
