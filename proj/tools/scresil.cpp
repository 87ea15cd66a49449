#include "scresil/cli.hpp"

int main(int argc, char** argv) { return scresil::cli::dispatch(argc, argv); }
