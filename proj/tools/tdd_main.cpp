#include <vector>

#include "tdd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return tdd::run(args);
}
