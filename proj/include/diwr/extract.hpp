#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diwr/config.hpp"
#include "diwr/point_cloud.hpp"

namespace diwr {

namespace mc {

// Classic marching-cubes lookup tables. kEdgeTable maps the 8-bit
// corner-sign pattern of a cell to the bitmask of crossed edges; kTriTable
// lists the output triangles as edge-index triples, -1 terminated.
extern const int kEdgeTable[256];
extern const int kTriTable[256][16];

}  // namespace mc

// A copy of the cloud restricted to the points the optimizer still trusts.
struct RetainedCloud {
    PointCloud cloud;
    std::vector<std::size_t> source_index;  // retained slot -> original index
};

// Keeps exactly the points with confidence >= tau_in, carrying every
// per-point channel over. Throws EmptyResult when nothing qualifies.
RetainedCloud retain_high_confidence(const PointCloud& cloud, double tau_in);

// Triangulates the iso level set of the winding field. The field is sampled
// on a resolution^3 corner lattice spanning the padded unit box
// (cfg.box_margin per side) with the far-field evaluator at cfg.beta;
// corners within cfg.r_s of a cloud point are re-evaluated exactly so the
// level crossing itself never sees expansion error. By default only the
// largest edge-connected component survives, suppressing floater shells
// around residual outliers. Triangles wind outward (positive enclosed
// volume) when the field is larger than iso inside the surface.
// Throws EmptyInput for an empty cloud, Error for resolution < 32, and
// EmptyLevelSet when no cell straddles iso.
TriMesh extract_isosurface(const PointCloud& cloud, const OptimConfig& cfg, int resolution,
                           double iso = 0.5, bool keep_all_components = false);

// Connectivity and volume audit of a triangle mesh.
struct MeshAudit {
    std::size_t boundary_edges = 0;     // edges with exactly one incident face
    std::size_t nonmanifold_edges = 0;  // edges with more than two
    std::size_t component_count = 0;    // edge-connected face groups
    std::ptrdiff_t euler_characteristic = 0;  // V - E + F
    double volume = 0.0;  // divergence-theorem volume, signed by winding

    bool watertight() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshAudit audit_mesh(const TriMesh& mesh);

// Writes the cloud as an oriented point set (binary little-endian PLY with
// x y z nx ny nz and a weight property holding a_i * c_i), the input format
// screened-Poisson style meshers consume. Throws EmptyInput for an empty
// cloud, Error when the path cannot be opened.
void export_oriented_points(const PointCloud& cloud, const std::string& path);

}  // namespace diwr
