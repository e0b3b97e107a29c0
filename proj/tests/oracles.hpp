#pragma once

// Independent reference computations the tests check production code
// against: finite differences, brute-force scans, Monte-Carlo estimates.
// Nothing here calls the library's accelerated paths.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "diwr/core.hpp"

namespace oracle {

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// relative agreement with an absolute floor for near-zero references
inline bool close_rel(double got, double want, double rel, double abs_floor = 1e-12) {
    return std::abs(got - want) <= std::max(abs_floor, rel * std::abs(want));
}

inline std::vector<int> brute_knn(const std::vector<diwr::Vec3>& pts, const diwr::Vec3& q, int k,
                                  int exclude = -1) {
    std::vector<std::pair<double, int>> d;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        if (i == exclude) continue;
        d.emplace_back((pts[i] - q).squaredNorm(), i);
    }
    std::sort(d.begin(), d.end());
    std::vector<int> out;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(d.size())); ++i) out.push_back(d[i].second);
    return out;
}

inline int brute_radius_count(const std::vector<diwr::Vec3>& pts, const diwr::Vec3& q, double r) {
    int count = 0;
    for (const auto& p : pts)
        if ((p - q).squaredNorm() <= r * r) ++count;
    return count;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Scratch directory for IO round trips, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / (tag + "_" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create temp dir");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
