#include "mvptm/cli.hpp"

int main(int argc, char** argv) { return mvptm::cli::run(argc, argv); }
