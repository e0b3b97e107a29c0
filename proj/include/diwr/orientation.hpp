#pragma once

#include <cstdint>
#include <vector>

#include "diwr/config.hpp"
#include "diwr/point_cloud.hpp"
#include "diwr/winding.hpp"

namespace diwr {

// Draws a fresh unit normal for every point, uniform on the sphere and
// deterministic per seed.
void init_normals_random(PointCloud& cloud, std::uint64_t seed);

// Area weight of each point from the 2-D Voronoi cell of its projected
// neighborhood: the k nearest neighbors and the point itself are projected
// onto their principal plane and the cell is clipped against the
// neighborhood's bounding disc so boundary cells stay finite. Neighborhoods
// whose points are collinear get the mean of the defined cells afterwards;
// if every neighborhood is degenerate, throws DegenerateNeighborhood.
void init_area_voronoi(PointCloud& cloud, int k = 16);

// a_i = 1 for every point.
void init_area_uniform(PointCloud& cloud);

// Drives each normal toward the negated direction of the field gradient at
// its point (self-contribution excluded), blending with the previous normal
// and renormalizing, over cfg.inner_iters Jacobi sweeps. When the incoming
// normals disagree with the field's own gradient directions (random or
// heavily corrupted input), the early sweeps run against a width-softened
// field whose width starts near the cloud extent and halves every few
// sweeps, settling the global orientation before the true field takes over;
// already-coherent normals skip that phase. Sweeps at zero width stop early
// when the mean angular change drops below cfg.change_tolerance, and the
// evaluator is refreshed as the normals move. A post-pass fixes the global
// sign: the field is probed a step of 2*r_s behind and in front of the
// highest-confidence points, and all normals flip when the enclosed side
// comes out negative. Returns the mean angular change (radians) of the last
// sweep, measured before the flip.
double update_normals(PointCloud& cloud, WindingEvaluator& eval,
                      const OrientationUpdateConfig& cfg, double r_s);

// Mean of (1 - old.new)/2 over the masked indices, in [0, 1] for unit
// inputs. Throws EmptyMask when the mask is empty.
double normal_change(const std::vector<Vec3>& old_normals,
                     const std::vector<Vec3>& new_normals,
                     const std::vector<std::size_t>& mask);

}  // namespace diwr
