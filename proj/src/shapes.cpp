#include "diwr/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace diwr::shapes {

namespace {
constexpr double kPi = std::numbers::pi;

void finish_cloud(PointCloud& cloud, double per_point_area) {
    const std::size_t n = cloud.positions.size();
    cloud.area_weights.assign(n, per_point_area);
    cloud.confidences.assign(n, 1.0);
    cloud.densities.assign(n, 0);
    cloud.bump();
}
}  // namespace

PointCloud sphere_fibonacci(std::size_t n, double radius, const Vec3& center) {
    PointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        const Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
        cloud.positions.push_back(center + radius * dir);
        cloud.normals.push_back(dir);
    }
    finish_cloud(cloud, 4.0 * kPi * radius * radius / static_cast<double>(n));
    return cloud;
}

PointCloud sphere_random(std::size_t n, double radius, const Vec3& center, std::uint64_t seed) {
    PointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    Rng rng(seed);
    std::uniform_real_distribution<double> uz(-1.0, 1.0);
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = uz(rng);
        const double phi = uphi(rng);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
        cloud.positions.push_back(center + radius * dir);
        cloud.normals.push_back(dir);
    }
    finish_cloud(cloud, 4.0 * kPi * radius * radius / static_cast<double>(n));
    return cloud;
}

PointCloud torus_random(std::size_t n, double R, double r, std::uint64_t seed) {
    PointCloud cloud;
    cloud.positions.reserve(n);
    cloud.normals.reserve(n);
    Rng rng(seed);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    while (cloud.positions.size() < n) {
        const double u = uang(rng);
        const double v = uang(rng);
        // area element is proportional to R + r*cos(v); rejection keeps the
        // sampling uniform by area
        if (u01(rng) * (R + r) > R + r * std::cos(v)) continue;
        const Vec3 ring(std::cos(u), std::sin(u), 0.0);
        const Vec3 normal = std::cos(v) * ring + Vec3(0, 0, std::sin(v));
        cloud.positions.push_back(R * ring + r * normal);
        cloud.normals.push_back(normal);
    }
    finish_cloud(cloud, 4.0 * kPi * kPi * R * r / static_cast<double>(n));
    return cloud;
}

PointCloud square_lattice(std::size_t m, double spacing) {
    PointCloud cloud;
    cloud.positions.reserve(m * m);
    cloud.normals.reserve(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            cloud.positions.emplace_back(spacing * static_cast<double>(i),
                                         spacing * static_cast<double>(j), 0.0);
            cloud.normals.emplace_back(0, 0, 1);
        }
    finish_cloud(cloud, spacing * spacing);
    return cloud;
}

std::function<bool(const Vec3&)> inside_sphere(double radius, const Vec3& center) {
    return [=](const Vec3& p) { return (p - center).norm() < radius; };
}

std::function<bool(const Vec3&)> inside_torus(double R, double r) {
    return [=](const Vec3& p) {
        const double ring = std::hypot(p.x(), p.y()) - R;
        return ring * ring + p.z() * p.z() < r * r;
    };
}

TriMesh icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh mesh;
    mesh.vertices = {{-1, t, 0},  {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                     {0, -1, t},  {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                     {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const std::pair<std::uint32_t, std::uint32_t> key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<std::uint32_t, 3>> refined;
        refined.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            const std::uint32_t ab = mid(f[0], f[1]);
            const std::uint32_t bc = mid(f[1], f[2]);
            const std::uint32_t ca = mid(f[2], f[0]);
            refined.push_back({f[0], ab, ca});
            refined.push_back({f[1], bc, ab});
            refined.push_back({f[2], ca, bc});
            refined.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(refined);
    }
    for (Vec3& v : mesh.vertices) v = radius * v.normalized();
    return mesh;
}

TriMesh uv_sphere(int stacks, int slices, double radius) {
    TriMesh mesh;
    auto vid = [&](int s, int k) {
        // poles are shared single vertices
        if (s == 0) return std::uint32_t{0};
        if (s == stacks) return std::uint32_t{1};
        return static_cast<std::uint32_t>(2 + (s - 1) * slices + (k % slices));
    };
    mesh.vertices.emplace_back(0, 0, radius);
    mesh.vertices.emplace_back(0, 0, -radius);
    for (int s = 1; s < stacks; ++s) {
        const double theta = kPi * static_cast<double>(s) / stacks;
        for (int k = 0; k < slices; ++k) {
            const double phi = 2.0 * kPi * static_cast<double>(k) / slices;
            mesh.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi),
                                       radius * std::sin(theta) * std::sin(phi),
                                       radius * std::cos(theta));
        }
    }
    for (int k = 0; k < slices; ++k) {
        mesh.faces.push_back({vid(0, 0), vid(1, k), vid(1, k + 1)});
        mesh.faces.push_back({vid(stacks, 0), vid(stacks - 1, k + 1), vid(stacks - 1, k)});
    }
    for (int s = 1; s < stacks - 1; ++s)
        for (int k = 0; k < slices; ++k) {
            mesh.faces.push_back({vid(s, k), vid(s + 1, k), vid(s + 1, k + 1)});
            mesh.faces.push_back({vid(s, k), vid(s + 1, k + 1), vid(s, k + 1)});
        }
    return mesh;
}

}  // namespace diwr::shapes
