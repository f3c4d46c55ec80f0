#include "commands.hpp"

int main(int argc, char** argv) { return cursor::cli::run(argc, argv); }
