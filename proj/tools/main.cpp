#include "storalloc/cli.hpp"

int main(int argc, char** argv) { return storalloc::run_cli(argc, argv); }
