#include "diwr/energy_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "diwr/kdtree.hpp"

namespace diwr {

namespace {
constexpr int kSubdiv = 4;  // sub-voxel quadrature resolution per axis

// volume fraction of the voxel centered at q (side h) not covered by the
// ball at center with radius r_s, estimated on a kSubdiv^3 lattice
double uncovered_fraction(const Vec3& q, double h, const Vec3& center, double rs2) {
    const double step = h / kSubdiv;
    const double base = -0.5 * h + 0.5 * step;
    int outside = 0;
    for (int a = 0; a < kSubdiv; ++a)
        for (int b = 0; b < kSubdiv; ++b)
            for (int c = 0; c < kSubdiv; ++c) {
                const Vec3 sub = q + Vec3(base + a * step, base + b * step, base + c * step);
                if ((sub - center).squaredNorm() > rs2) ++outside;
            }
    return static_cast<double>(outside) / (kSubdiv * kSubdiv * kSubdiv);
}
}  // namespace

EnergyGrid build_grid(const PointCloud& cloud, const OptimConfig& cfg) {
    EnergyGrid grid;
    grid.resolution = cfg.grid_resolution;
    grid.box.lo = Vec3::Constant(-cfg.box_margin);
    grid.box.hi = Vec3::Constant(1.0 + cfg.box_margin);
    const double side = 1.0 + 2.0 * cfg.box_margin;
    const int res = cfg.grid_resolution;
    const double h = side / res;
    grid.voxel_volume = h * h * h;

    const std::vector<std::size_t> trusted = cloud.high_confidence_indices(cfg.tau_in);
    std::vector<Vec3> centers;
    centers.reserve(trusted.size());
    for (std::size_t i : trusted) centers.push_back(cloud.positions[i]);

    const std::size_t total = static_cast<std::size_t>(res) * res * res;
    auto voxel_center = [&](std::size_t idx) {
        const int i = static_cast<int>(idx % res);
        const int j = static_cast<int>((idx / res) % res);
        const int k = static_cast<int>(idx / (static_cast<std::size_t>(res) * res));
        return Vec3(grid.box.lo.x() + (i + 0.5) * h, grid.box.lo.y() + (j + 0.5) * h,
                    grid.box.lo.z() + (k + 0.5) * h);
    };

    // -1 marks a dropped voxel; anything else is its delta
    std::vector<double> delta(total, 1.0);
    if (!centers.empty()) {
        const KdTree tree(centers);
        const double rs2 = cfg.r_s * cfg.r_s;
        const double reach = cfg.r_s + 0.5 * h * std::sqrt(3.0);
        parallel_for(total, [&](std::size_t idx) {
            const Vec3 q = voxel_center(idx);
            const std::vector<int> near = tree.radius_indices(q, reach);
            double d = 1.0;
            for (int id : near) {
                const Vec3& c = centers[id];
                if ((c - q).squaredNorm() <= rs2) {
                    d = -1.0;
                    break;
                }
                const double frac = uncovered_fraction(q, h, c, rs2);
                if (frac < 1.0) d = std::min(d, std::clamp(frac, 0.5, 1.0));
            }
            delta[idx] = d;
        });
    }

    grid.samples.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx)
        if (delta[idx] >= 0.0) grid.samples.push_back({voxel_center(idx), delta[idx]});
    return grid;
}

void dump_grid_csv(const EnergyGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "x,y,z,delta\n";
    char line[160];
    for (const GridSample& s : grid.samples) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n", s.position.x(),
                      s.position.y(), s.position.z(), s.delta);
        out << line;
    }
}

}  // namespace diwr
