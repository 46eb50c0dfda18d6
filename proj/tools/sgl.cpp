#include "sgl/app.hpp"

int main(int argc, char** argv) { return sgl::run_cli(argc, argv); }
