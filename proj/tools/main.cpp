#include "slelab/cli.hpp"

int main(int argc, char** argv) { return slelab::main_entry(argc, argv); }
