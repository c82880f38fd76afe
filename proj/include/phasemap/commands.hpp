#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "phasemap/metrics.hpp"

namespace phasemap {

inline constexpr const char* kVersion = "0.1.0";

// Environment variable holding the default worker count for scans.
inline constexpr const char* kWorkersEnv = "PHASEMAP_WORKERS";

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_io = 2,
    exit_all_failed = 3,
};

// Cosine-matrix file: "PHMAPCM1", u64 k, k x u64 row indices, k*k f64
// values row-major; all little-endian.
void save_cosine_matrix(const std::filesystem::path& path, const CosineMatrix& cm);
CosineMatrix load_cosine_matrix(const std::filesystem::path& path);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace phasemap
