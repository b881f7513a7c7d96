#include <iostream>
#include <string>
#include <vector>

#include "wsd/commands.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return wsd::dispatch(args, std::cout, std::cerr);
}
