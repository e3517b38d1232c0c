#include "kinlim/cli.hpp"

int main(int argc, char** argv) { return kinlim::dispatch(argc, argv); }
