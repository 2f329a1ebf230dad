// Writes the built-in platform, oracle and function descriptions as JSON.
// Usage: write_defaults <data-dir>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "enermod/enermod.hpp"

namespace fs = std::filesystem;
using namespace enermod;

static void put(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << j.dump(2) << "\n";
}

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: write_defaults <data-dir>\n";
        return 2;
    }
    fs::path dir(argv[1]);
    SystemConfig config;
    put(dir / "config.json", to_json(config));
    put(dir / "isa.json", to_json(default_isa()));
    put(dir / "api.json", to_json(default_api()));
    put(dir / "oracle_params.json", to_json(default_oracle_params()));
    for (const auto& name : standard_function_names()) put(dir / "functions" / (name + ".json"), to_json(standard_function(name)));
    return 0;
}
