#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "swarmlfa/hdi_data.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("swarmlfa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Random sparse matrix with each cell present with probability density.
inline swarmlfa::HdiMatrix random_matrix(std::size_t users, std::size_t items, double density, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<swarmlfa::RatingEntry> es;
    for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t i = 0; i < items; ++i) {
            if (u01(gen) < density) {
                es.push_back({static_cast<swarmlfa::Index>(u), static_cast<swarmlfa::Index>(i), 1.0 + 4.0 * u01(gen)});
            }
        }
    }
    return swarmlfa::HdiMatrix(users, items, std::move(es));
}

inline std::vector<swarmlfa::RatingEntry> entries_of(const swarmlfa::HdiMatrix& m) {
    return {m.entries().begin(), m.entries().end()};
}

}  // namespace test_support
