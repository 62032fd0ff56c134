#include "unlearnq/cli.hpp"

int main(int argc, char** argv) { return unlearnq::cli::run(argc, argv); }
