#include "cli.hpp"

int main(int argc, char** argv) { return mcdrop::cli::run(argc, argv); }
