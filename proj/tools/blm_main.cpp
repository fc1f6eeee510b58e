#include "blm/cli.hpp"

int main(int argc, char** argv) { return blm::run(argc, argv); }
