#include "aop3d/cli.hpp"

int main(int argc, char** argv) { return aop3d::cli::dispatch(argc, argv); }
