#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diwr/core.hpp"
#include "diwr/point_cloud.hpp"

namespace diwr {

constexpr int kDensityLevels = 128;

// Summary of one confidence reset: the coarse two-cluster split of the
// winding values followed by the density-stratified softening.
struct ConfidenceResetReport {
    double outlier_cluster_mean = 0.0;
    double inlier_cluster_mean = 0.0;
    double global_mean = 0.0;
    std::size_t protected_count = 0;
    std::vector<double> level_means;  // one entry per density level after a
                                      // reset; empty levels report 1.0
};

std::string report_json(const ConfidenceResetReport& report);

// Two-means split of scalar values, deterministically seeded at the min and
// max. Returns one flag per value: 1 marks the cluster whose mean deviates
// more from the global mean (ties go to the higher-valued cluster), 0 the
// other. All-equal input flags nothing.
std::vector<std::uint8_t> bimeans_split(const std::vector<double>& values,
                                        ConfidenceResetReport* report = nullptr);

// rho_i = number of other points within r_rho of p_i (boundary inclusive),
// written to cloud.densities.
void compute_densities(PointCloud& cloud, double r_rho);

// Softens binary outlier flags into level-wise confidences: points fall into
// equal-width density levels and each one receives the mean binary
// confidence (inlier = 1) of its level, except that points whose winding
// value lies within 0.1 of the global mean keep their current confidence.
// Requires cloud.densities (see compute_densities).
std::vector<double> density_stratified_reset(const PointCloud& cloud,
                                             const std::vector<std::uint8_t>& outlier,
                                             const std::vector<double>& winding_values,
                                             ConfidenceResetReport* report = nullptr);

// Full reset: bimeans_split on the winding values, then
// density_stratified_reset, written into cloud.confidences.
ConfidenceResetReport reset_confidences(PointCloud& cloud,
                                        const std::vector<double>& winding_values);

}  // namespace diwr
