#include "rdom/cli.hpp"

int main(int argc, char** argv) { return rdom::cli::run(argc, argv); }
