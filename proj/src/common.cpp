#include "deadwood/common.hpp"

#include <cstdio>

namespace deadwood {

double pairwise_combine(std::vector<double>& partial) {
    size_t n = partial.size();
    if (n == 0) return 0.0;
    while (n > 1) {
        const size_t half = (n + 1) / 2;
        for (size_t i = 0; i < n / 2; ++i) {
            partial[i] = partial[2 * i] + partial[2 * i + 1];
        }
        if (n % 2 == 1) partial[n / 2] = partial[n - 1];
        n = half;
    }
    return partial[0];
}

std::string file_digest_hex(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open for digest: " + path);
    uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    char buf[65536];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) {
        for (size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    std::fclose(f);
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return std::string(out);
}

}  // namespace deadwood
