#include "psiland/commands.hpp"

int main(int argc, char** argv) { return psiland::run_cli(argc, argv); }
