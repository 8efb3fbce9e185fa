#include "dgwm/cli.hpp"

int main(int argc, char** argv) { return dgwm::run_command(argc, argv); }
