#include "fdfx/cli.hpp"

int main(int argc, char** argv) { return fdfx::main_entry(argc, argv); }
