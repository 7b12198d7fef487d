#include <iostream>
#include <string>
#include <vector>

#include "resnet_synth/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return resnet_synth::cli::run(args, std::cout, std::cerr);
}
