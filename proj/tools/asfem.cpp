#include <iostream>

#include "asfem/cli_config.hpp"

int main(int argc, char** argv) {
    asfem::RunConfig cfg;
    CLI::App app{"adaptive stabilized FEM driver"};
    asfem::attach_cli(app, cfg);
    CLI11_PARSE(app, argc, argv);
    try {
        return asfem::run(cfg);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
