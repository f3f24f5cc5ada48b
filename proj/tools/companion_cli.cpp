#include <string>
#include <vector>

#include "companion/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return companion::run_cli(std::move(args));
}
