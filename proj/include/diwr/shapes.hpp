#pragma once

#include <cstdint>
#include <functional>

#include "diwr/point_cloud.hpp"

namespace diwr::shapes {

// Samplers for synthetic surfaces. Clouds come back with exact outward
// normals, per-point area weights summing to the true surface area, and
// confidence 1, so callers can degrade exactly the channels they study.

// Deterministic near-uniform sphere sampling (golden-angle spiral).
PointCloud sphere_fibonacci(std::size_t n, double radius = 1.0, const Vec3& center = Vec3::Zero());

// Uniform random sphere sampling.
PointCloud sphere_random(std::size_t n, double radius, const Vec3& center, std::uint64_t seed);

// Uniform-by-area random sampling of a torus with major radius R (in the
// xy-plane, centered at the origin) and tube radius r.
PointCloud torus_random(std::size_t n, double R, double r, std::uint64_t seed);

// m x m planar lattice with the given spacing, in the z = 0 plane.
PointCloud square_lattice(std::size_t m, double spacing);

// Interior predicates for outlier injection and classification checks.
std::function<bool(const Vec3&)> inside_sphere(double radius, const Vec3& center = Vec3::Zero());
std::function<bool(const Vec3&)> inside_torus(double R, double r);

// Icosahedron subdivided `subdivisions` times and projected onto a sphere.
TriMesh icosphere(int subdivisions, double radius = 1.0);

// Regular theta/phi sphere triangulation, handy as a dense reference mesh.
TriMesh uv_sphere(int stacks, int slices, double radius = 1.0);

}  // namespace diwr::shapes
