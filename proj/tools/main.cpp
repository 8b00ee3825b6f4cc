#include "ice/cli.hpp"

int main(int argc, char** argv) { return ice::cli_main(argc, argv); }
