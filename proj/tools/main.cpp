#include "deadwood/cli.hpp"

int main(int argc, char** argv) { return deadwood::cli::dispatch(argc, argv); }
