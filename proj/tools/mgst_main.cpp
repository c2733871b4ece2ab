#include "mgst/cli.hpp"

int main(int argc, char** argv) {
    return mgst::cli::run_cli(argc, argv);
}
