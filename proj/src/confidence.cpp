#include "diwr/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "diwr/kdtree.hpp"
#include "json.hpp"

namespace diwr {

namespace {

// points whose winding value sits this close to the global mean keep their
// confidence through a reset
constexpr double kProtectBand = 0.1;
constexpr int kLloydIters = 100;

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

std::string report_json(const ConfidenceResetReport& report) {
    nlohmann::json j;
    j["outlier_cluster_mean"] = report.outlier_cluster_mean;
    j["inlier_cluster_mean"] = report.inlier_cluster_mean;
    j["global_mean"] = report.global_mean;
    j["protected_count"] = report.protected_count;
    j["level_means"] = report.level_means;
    return j.dump();
}

std::vector<std::uint8_t> bimeans_split(const std::vector<double>& values,
                                        ConfidenceResetReport* report) {
    const std::size_t n = values.size();
    std::vector<std::uint8_t> flags(n, 0);
    const double global = mean_of(values);
    if (report) {
        report->global_mean = global;
        report->inlier_cluster_mean = global;
        report->outlier_cluster_mean = global;
    }
    if (n == 0) return flags;

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double low = *lo_it;
    double high = *hi_it;
    if (report) {
        report->inlier_cluster_mean = low;
        report->outlier_cluster_mean = low;
    }
    if (low == high) return flags;

    // Lloyd in one dimension: the centers stay ordered and each keeps at
    // least the extreme value it was seeded with, so neither cluster empties.
    double mid = 0.5 * (low + high);
    for (int iter = 0; iter < kLloydIters; ++iter) {
        double sum_low = 0.0, sum_high = 0.0;
        std::size_t n_low = 0, n_high = 0;
        for (double v : values) {
            if (v < mid) {
                sum_low += v;
                ++n_low;
            } else {
                sum_high += v;
                ++n_high;
            }
        }
        const double next_low = sum_low / static_cast<double>(n_low);
        const double next_high = sum_high / static_cast<double>(n_high);
        if (next_low == low && next_high == high) break;
        low = next_low;
        high = next_high;
        mid = 0.5 * (low + high);
    }

    // the cluster farther from the global mean is the outlier one; on a tie
    // the higher-valued cluster is flagged
    const bool high_is_outlier = std::abs(high - global) >= std::abs(low - global);
    for (std::size_t i = 0; i < n; ++i)
        flags[i] = (values[i] >= mid) == high_is_outlier ? 1 : 0;

    if (report) {
        report->outlier_cluster_mean = high_is_outlier ? high : low;
        report->inlier_cluster_mean = high_is_outlier ? low : high;
    }
    return flags;
}

void compute_densities(PointCloud& cloud, double r_rho) {
    const KdTree tree(cloud.positions);
    cloud.densities.resize(cloud.size());
    parallel_for(cloud.size(), [&](std::size_t i) {
        cloud.densities[i] = tree.radius_count(cloud.positions[i], r_rho) - 1;
    });
    cloud.bump();
}

std::vector<double> density_stratified_reset(const PointCloud& cloud,
                                             const std::vector<std::uint8_t>& outlier,
                                             const std::vector<double>& winding_values,
                                             ConfidenceResetReport* report) {
    const std::size_t n = cloud.size();
    if (outlier.size() != n) throw MismatchedSizes(outlier.size(), n);
    if (winding_values.size() != n) throw MismatchedSizes(winding_values.size(), n);
    if (cloud.densities.size() != n) throw MismatchedSizes(cloud.densities.size(), n);

    const double global = mean_of(winding_values);

    int rho_min = 0, rho_max = 0;
    if (n > 0) {
        const auto [lo_it, hi_it] =
            std::minmax_element(cloud.densities.begin(), cloud.densities.end());
        rho_min = *lo_it;
        rho_max = *hi_it;
    }
    const double width = static_cast<double>(rho_max - rho_min) / kDensityLevels;
    auto level_of = [&](int rho) {
        if (width <= 0.0) return 0;
        const int lv = static_cast<int>(static_cast<double>(rho - rho_min) / width);
        return std::min(lv, kDensityLevels - 1);
    };

    // the binary flags are 0/1, so the per-level sums are small integers and
    // the means are exact regardless of accumulation order
    std::vector<double> sums(kDensityLevels, 0.0);
    std::vector<std::size_t> counts(kDensityLevels, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int lv = level_of(cloud.densities[i]);
        sums[lv] += outlier[i] ? 0.0 : 1.0;
        ++counts[lv];
    }
    std::vector<double> level_means(kDensityLevels, 1.0);
    for (int lv = 0; lv < kDensityLevels; ++lv)
        if (counts[lv] > 0) level_means[lv] = sums[lv] / static_cast<double>(counts[lv]);

    std::vector<double> conf(n);
    std::size_t protected_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(winding_values[i] - global) <= kProtectBand) {
            conf[i] = std::clamp(cloud.confidences[i], 0.0, 1.0);
            ++protected_count;
        } else {
            conf[i] = level_means[level_of(cloud.densities[i])];
        }
    }

    if (report) {
        report->global_mean = global;
        report->protected_count = protected_count;
        report->level_means = std::move(level_means);
    }
    return conf;
}

ConfidenceResetReport reset_confidences(PointCloud& cloud,
                                        const std::vector<double>& winding_values) {
    ConfidenceResetReport report;
    const std::vector<std::uint8_t> flags = bimeans_split(winding_values, &report);
    cloud.confidences = density_stratified_reset(cloud, flags, winding_values, &report);
    cloud.bump();
    return report;
}

}  // namespace diwr
