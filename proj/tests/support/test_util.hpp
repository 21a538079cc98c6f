#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resopt/reservoir.hpp"
#include "resopt/trajectory.hpp"

namespace resopt::testsupport {

// Fresh scratch directory under the build tree; recreated per construction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / "resopt_tests" / name;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline bool files_identical(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return ca == cb;
}

inline std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Medium test model: quarter-scale grid, cheap but with real fracture/matrix contrast.
inline ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.nx = 21;
    cfg.ny = 11;
    cfg.substeps_per_control = 3;
    return cfg;
}

// Very small model for optimizer-in-the-loop tests.
inline ModelConfig mini_config() {
    ModelConfig cfg;
    cfg.nx = 11;
    cfg.ny = 5;
    cfg.substeps_per_control = 2;
    return cfg;
}

inline std::vector<double> uniform_grid(int steps, double total_days = 600.0) {
    return geometric_time_grid(steps, total_days, 1.0);
}

} // namespace resopt::testsupport
