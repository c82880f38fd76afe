#include "phasemap/commands.hpp"

int main(int argc, char** argv) { return phasemap::run_cli(argc, argv); }
