#include "sefusion/cli.hpp"

int main(int argc, char** argv) { return sefusion::cli_main(argc, argv); }
