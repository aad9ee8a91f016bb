#include <string>
#include <vector>

#include "pgs/cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pgs::cli::run(std::move(args));
}
