#include "pqss/cli.hpp"

int main(int argc, char** argv) { return pqss::cli::run(argc, argv); }
