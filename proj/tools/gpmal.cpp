#include <string>
#include <vector>

#include "gpmal/cli.hpp"

int main(int argc, char** argv) {
    return gpmal::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
