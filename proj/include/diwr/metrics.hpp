#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diwr/core.hpp"
#include "diwr/point_cloud.hpp"

namespace diwr {

// Summary statistics of local spacing, roughness, and contamination for a
// cloud scaled to the unit cube.
struct QualityReport {
    double s_hat = 0.0;      // median mean-kNN spacing
    double sigma_hat = 0.0;  // median plane-fit residual
    double u_hat = 0.0;      // trimmed coefficient of variation of spacing
    double o_hat = 0.0;      // fraction of statistically sparse points
    int k = 0;               // neighbor count the measures used
    double trim_tau = 0.0;   // percent trimmed from each tail for u_hat
};

std::string report_json(const QualityReport& report);

// Computes the spacing and roughness measures. s_i is the mean distance from
// p_i to its k nearest neighbors and sigma_i the RMS distance of those
// neighbors to their least-squares plane; s_hat and sigma_hat are medians
// over the cloud. u_hat is std/mean of the s values after dropping the
// bottom and top trim_tau percent; o_hat is the fraction with
// s_i > mean + 2 std over the untrimmed s values. Throws Error for k outside
// [10, 40] or trim_tau outside [0, 50), TooFewPoints when the cloud has no
// more than k points.
QualityReport quality_measures(const PointCloud& cloud, int k = 20, double trim_tau = 10.0);

// Area-uniform random samples of a mesh surface, each carrying the unit
// normal of the face it landed on.
struct SampledSurface {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;
};

// Deterministic in seed. Throws EmptyInput for meshes without faces or with
// zero total area; degenerate faces are never sampled.
SampledSurface sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed = 0);

// Symmetric mean nearest-neighbor distance between two point sets:
// (mean over a of the distance to the closest b, plus the mirror image,
// halved). Unscaled; reports conventionally multiply by 1e3. Throws
// EmptyInput when either set is empty.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Mesh variant: both surfaces are sampled area-uniformly with sample_count
// points each, with identical seeds so the measure stays symmetric and a
// mesh compared to itself scores exactly zero.
double chamfer(const TriMesh& a, const TriMesh& b, std::size_t sample_count = 100000);

// Symmetric mean absolute cosine between each sample normal and the normal
// at the nearest sample of the other surface. Returns a value in [0, 1];
// identical meshes score exactly one.
double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t sample_count = 100000);

// Angular disagreement between two orientation fields of equal length.
struct OrientationError {
    double mean_angle_deg = 0.0;  // mean arccos of the clamped dot product
    double flip_fraction = 0.0;   // share of pairs with negative dot product
};

// Throws MismatchedSizes on length disagreement, EmptyInput on empty fields.
OrientationError orientation_error(const std::vector<Vec3>& normals,
                                   const std::vector<Vec3>& ground_truth);

}  // namespace diwr
