#include "gsmotion/cli.hpp"

int main(int argc, char** argv) { return gsmotion::cli::run(argc, argv); }
