#pragma once

// Welford-based reference implementations of the deviation statistics; an
// independent route for cross-checking the production formulas.

#include <cmath>
#include <cstdint>
#include <vector>

namespace crawl::testutil {

inline double ref_std(const std::vector<double>& xs) {
    long double mean = 0.0L, m2 = 0.0L;
    int64_t n = 0;
    for (double x : xs) {
        ++n;
        long double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    return static_cast<double>(std::sqrt(m2 / n));
}

inline double ref_imd(const std::vector<std::vector<double>>& grid) {
    long double acc = 0.0L;
    for (const auto& row : grid) acc += ref_std(row);
    return static_cast<double>(acc / grid.size());
}

inline double ref_cmd(const std::vector<std::vector<double>>& grid) {
    std::vector<double> means;
    for (const auto& row : grid) {
        long double m = 0.0L;
        for (double x : row) m += x;
        means.push_back(static_cast<double>(m / row.size()));
    }
    return ref_std(means);
}

}  // namespace crawl::testutil
