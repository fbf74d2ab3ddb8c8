#include "pfn/cli.hpp"

int main(int argc, char** argv) { return pfn::cli_dispatch(argc, argv); }
