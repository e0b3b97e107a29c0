#pragma once

#include <string>
#include <vector>

#include "diwr/config.hpp"
#include "diwr/core.hpp"
#include "diwr/point_cloud.hpp"

namespace diwr {

// One retained field sample: a voxel center and its partial-volume weight.
struct GridSample {
    Vec3 position{0, 0, 0};
    double delta = 1.0;
};

// Uniform sample set for the field-smoothness energy. Voxel centers of a
// resolution^3 grid over the padded unit cube, minus an exclusion ball of
// radius r_s around every trusted (c >= tau_in) point. Voxels cut by a ball
// but whose center stays outside keep a down-weighted delta in [0.5, 1]
// proportional to the volume fraction the ball leaves uncovered.
struct EnergyGrid {
    int resolution = 0;
    Box3 box;
    double voxel_volume = 0.0;
    std::vector<GridSample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

// Deterministic: same cloud and config produce an identical grid. An empty
// trusted set keeps every voxel at delta = 1.
EnergyGrid build_grid(const PointCloud& cloud, const OptimConfig& cfg);

// Debug dump, one "x,y,z,delta" row per retained sample.
void dump_grid_csv(const EnergyGrid& grid, const std::string& path);

}  // namespace diwr
