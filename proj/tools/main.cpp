#include <exception>
#include <iostream>

#include "escrowsim/cli.hpp"

int main(int argc, char** argv) {
    try {
        return escrowsim::cli::run_cli(argc, argv, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "escrowsim: " << e.what() << "\n";
        return escrowsim::cli::kExitRuntime;
    }
}
