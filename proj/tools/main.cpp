#include "healthwatch/cli.hpp"

int main(int argc, char** argv) { return healthwatch::cli::run(argc, argv); }
