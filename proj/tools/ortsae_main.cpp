#include "ortsae/cli.hpp"

int main(int argc, char** argv) { return ortsae::cli_run(argc, argv); }
