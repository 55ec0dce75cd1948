#include <vector>

#include "xtqa/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return xtqa::cli_run(args);
}
