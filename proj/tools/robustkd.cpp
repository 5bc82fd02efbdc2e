#include "robustkd/cli.hpp"

int main(int argc, char** argv) { return rkd::cli::dispatch(argc, argv); }
