#include "commands.hpp"

int main(int argc, char** argv) { return rcm::cli::main(argc, argv); }
