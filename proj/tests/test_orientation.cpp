#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "diwr/orientation.hpp"
#include "diwr/shapes.hpp"
#include "diwr/winding.hpp"
#include "doctest.h"

using namespace diwr;

namespace {

PointCloud make_cloud(const std::vector<Vec3>& positions) {
    PointCloud cloud;
    cloud.positions = positions;
    cloud.reset_state();
    return cloud;
}

double aligned_fraction(const PointCloud& cloud, const std::vector<Vec3>& truth) {
    std::size_t good = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.normals[i].dot(truth[i]) > 0.0) ++good;
    return static_cast<double>(good) / static_cast<double>(cloud.size());
}

double mean_angular_error(const PointCloud& cloud, const std::vector<Vec3>& truth) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        sum += std::acos(std::clamp(cloud.normals[i].dot(truth[i]), -1.0, 1.0));
    return sum / static_cast<double>(cloud.size());
}

// rotates every normal off its true direction by `angle`, along a random
// tangent, so the field stays coherent but inexact
void cone_perturb(PointCloud& cloud, const std::vector<Vec3>& truth, double angle,
                  std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Vec3 t(g(rng), g(rng), g(rng));
        t -= t.dot(truth[i]) * truth[i];
        while (t.norm() < 1e-12) {
            t = Vec3(g(rng), g(rng), g(rng));
            t -= t.dot(truth[i]) * truth[i];
        }
        t.normalize();
        cloud.normals[i] = std::cos(angle) * truth[i] + std::sin(angle) * t;
    }
    cloud.bump();
}

}  // namespace

TEST_SUITE("orientation") {

TEST_CASE("random normals are unit length and deterministic") {
    PointCloud cloud = shapes::sphere_random(200, 1.0, Vec3::Zero(), 9);
    init_normals_random(cloud, 31);
    for (const Vec3& n : cloud.normals) CHECK(std::abs(n.norm() - 1.0) <= 1e-9);

    PointCloud again = shapes::sphere_random(200, 1.0, Vec3::Zero(), 9);
    init_normals_random(again, 31);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK(cloud.normals[i] == again.normals[i]);

    init_normals_random(again, 32);
    bool any_differs = false;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.normals[i] != again.normals[i]) any_differs = true;
    CHECK(any_differs);
}

TEST_CASE("random normals distribute uniformly") {
    PointCloud cloud = shapes::sphere_random(100000, 1.0, Vec3::Zero(), 4);
    init_normals_random(cloud, 8);
    Vec3 mean = Vec3::Zero();
    for (const Vec3& n : cloud.normals) mean += n;
    mean /= static_cast<double>(cloud.size());
    for (int axis = 0; axis < 3; ++axis) CHECK(std::abs(mean[axis]) < 0.02);
}

TEST_CASE("voronoi areas reproduce the square lattice cell") {
    // deep inside a lattice of spacing h, the eight-point ring bounds the
    // exact h-by-h cell and the bounding disc never clips it
    const double h = 0.05;
    PointCloud cloud = shapes::square_lattice(21, h);
    init_area_voronoi(cloud, 8);
    for (std::size_t row = 8; row <= 12; ++row)
        for (std::size_t col = 8; col <= 12; ++col)
            CHECK(std::abs(cloud.area_weights[row * 21 + col] - h * h) <= 1e-6);
}

TEST_CASE("voronoi areas cover the sphere") {
    PointCloud cloud = shapes::sphere_fibonacci(20000, 1.0, Vec3(0.5, 0.5, 0.5));
    init_area_voronoi(cloud, 16);
    double total = 0.0;
    for (double a : cloud.area_weights) {
        CHECK(a >= 0.0);
        total += a;
    }
    const double sphere = 4.0 * std::numbers::pi;
    CHECK(total >= 0.9 * sphere);
    CHECK(total <= 1.1 * sphere);
}

TEST_CASE("square corners with three neighbors get positive cells") {
    PointCloud cloud = make_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)});
    init_area_voronoi(cloud, 3);
    for (double a : cloud.area_weights) CHECK(a > 0.0);
}

TEST_CASE("a fully collinear cloud has no area cells") {
    std::vector<Vec3> line;
    for (int i = 0; i < 10; ++i) line.emplace_back(0.1 * i, 0.0, 0.0);
    PointCloud cloud = make_cloud(line);
    CHECK_THROWS_AS(init_area_voronoi(cloud, 3), DegenerateNeighborhood);
}

TEST_CASE("degenerate neighborhoods fall back to the defined mean") {
    // a 3x3 planar patch plus a distant line; every line point sees only
    // other line points, so its cell is undefined and takes the mean
    std::vector<Vec3> positions;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) positions.emplace_back(0.2 * r, 0.2 * c, 0.0);
    for (int i = 0; i < 5; ++i) positions.emplace_back(0.1 * i, 0.0, 10.0);
    PointCloud cloud = make_cloud(positions);
    init_area_voronoi(cloud, 4);

    double defined_mean = 0.0;
    for (std::size_t i = 0; i < 9; ++i) defined_mean += cloud.area_weights[i];
    defined_mean /= 9.0;
    for (std::size_t i = 9; i < positions.size(); ++i)
        CHECK(cloud.area_weights[i] == doctest::Approx(defined_mean).epsilon(1e-12));
}

TEST_CASE("neighbor count preconditions are enforced") {
    PointCloud cloud = shapes::sphere_fibonacci(10);
    CHECK_THROWS_AS(init_area_voronoi(cloud, 2), Error);
    CHECK_THROWS_AS(init_area_voronoi(cloud, 10), Error);
    CHECK_THROWS_AS(init_area_voronoi(cloud, 11), Error);
}

TEST_CASE("uniform area init writes ones") {
    PointCloud cloud = shapes::sphere_fibonacci(50);
    init_area_uniform(cloud);
    double total = 0.0;
    for (double a : cloud.area_weights) {
        CHECK(a == 1.0);
        total += a;
    }
    CHECK(total == 50.0);
    init_area_uniform(cloud);
    for (double a : cloud.area_weights) CHECK(a == 1.0);
}

TEST_CASE("a single point keeps its normal") {
    PointCloud cloud = make_cloud({Vec3(0.3, 0.4, 0.5)});
    cloud.normals[0] = Vec3(0, 0, 1);
    cloud.bump();
    WindingEvaluator eval(cloud, 2.0);
    OrientationUpdateConfig cfg;
    const double delta = update_normals(cloud, eval, cfg, 0.03);
    CHECK(delta == 0.0);
    CHECK(cloud.normals[0] == Vec3(0, 0, 1));
}

TEST_CASE("a zero-confidence cloud leaves normals alone") {
    PointCloud cloud = shapes::sphere_fibonacci(200, 1.0, Vec3(0.5, 0.5, 0.5));
    init_normals_random(cloud, 6);
    std::vector<Vec3> before = cloud.normals;
    cloud.confidences.assign(cloud.size(), 0.0);
    cloud.bump();
    WindingEvaluator eval(cloud, 2.0);
    OrientationUpdateConfig cfg;
    const double delta = update_normals(cloud, eval, cfg, 0.03);
    // kept normals still report the acos rounding floor: a unit vector whose
    // norm rounds below one has a self-dot below one
    CHECK(delta <= 1e-7);
    for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(cloud.normals[i] == before[i]);
}

TEST_CASE("a clean sphere orients outward from random normals") {
    PointCloud cloud = shapes::sphere_fibonacci(5000, 1.0, Vec3(0.5, 0.5, 0.5));
    const std::vector<Vec3> truth = cloud.normals;
    init_normals_random(cloud, 3);
    WindingEvaluator eval(cloud, 2.0);
    OrientationUpdateConfig cfg;
    update_normals(cloud, eval, cfg, 0.03);
    CHECK(aligned_fraction(cloud, truth) >= 0.99);
    for (const Vec3& n : cloud.normals) CHECK(std::abs(n.norm() - 1.0) <= 1e-12);

    // a second call sees a coherent field, skips the consensus phase, and
    // reports a near-converged change
    const double delta = update_normals(cloud, eval, cfg, 0.03);
    CHECK(aligned_fraction(cloud, truth) >= 0.99);
    CHECK(delta < 0.01);
}

TEST_CASE("an inward-coherent sphere flips outward") {
    PointCloud cloud = shapes::sphere_fibonacci(1000, 1.0, Vec3(0.5, 0.5, 0.5));
    const std::vector<Vec3> truth = cloud.normals;
    for (Vec3& n : cloud.normals) n = -n;
    cloud.bump();
    WindingEvaluator eval(cloud, 2.0);
    OrientationUpdateConfig cfg;
    update_normals(cloud, eval, cfg, 0.03);
    CHECK(aligned_fraction(cloud, truth) >= 0.99);
}

TEST_CASE("cone-perturbed normals polish monotonically") {
    PointCloud cloud = shapes::sphere_fibonacci(2000, 1.0, Vec3(0.5, 0.5, 0.5));
    const std::vector<Vec3> truth = cloud.normals;
    cone_perturb(cloud, truth, 15.0 * std::numbers::pi / 180.0, 5150);
    WindingEvaluator eval(cloud, 2.0);
    OrientationUpdateConfig cfg;
    cfg.inner_iters = 1;
    double prev = mean_angular_error(cloud, truth);
    for (int sweep = 0; sweep < 5; ++sweep) {
        update_normals(cloud, eval, cfg, 0.03);
        const double err = mean_angular_error(cloud, truth);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(aligned_fraction(cloud, truth) == 1.0);
}

TEST_CASE("flipped input converges to the identical normal set") {
    PointCloud a = shapes::sphere_fibonacci(1500, 1.0, Vec3(0.5, 0.5, 0.5));
    init_normals_random(a, 77);
    PointCloud b = a;
    for (Vec3& n : b.normals) n = -n;
    b.bump();
    WindingEvaluator ea(a, 2.0);
    WindingEvaluator eb(b, 2.0);
    OrientationUpdateConfig cfg;
    update_normals(a, ea, cfg, 0.03);
    update_normals(b, eb, cfg, 0.03);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK((a.normals[i] - b.normals[i]).norm() <= 1e-15);
}

TEST_CASE("the update commutes with rotation") {
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    PointCloud a = shapes::sphere_fibonacci(500, 1.0, Vec3(0.5, 0.5, 0.5));
    init_normals_random(a, 12);
    PointCloud b = a;
    for (Vec3& p : b.positions) p = rot * p;
    for (Vec3& n : b.normals) n = rot * n;
    b.bump();

    WindingEvaluator ea(a, 0.0);
    WindingEvaluator eb(b, 0.0);
    OrientationUpdateConfig cfg;
    cfg.inner_iters = 3;
    update_normals(a, ea, cfg, 0.03);
    update_normals(b, eb, cfg, 0.03);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK((rot * a.normals[i] - b.normals[i]).norm() <= 1e-9);
}

TEST_CASE("normal change measures masked agreement") {
    const std::vector<Vec3> base = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    std::vector<std::size_t> all = {0, 1, 2};
    CHECK(normal_change(base, base, all) == 0.0);

    std::vector<Vec3> flipped = base;
    for (Vec3& n : flipped) n = -n;
    CHECK(normal_change(base, flipped, all) == 1.0);

    const std::vector<Vec3> orthogonal = {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0)};
    CHECK(normal_change(base, orthogonal, all) == 0.5);

    const std::vector<std::size_t> partial = {1};
    CHECK(normal_change(base, flipped, partial) == 1.0);

    CHECK_THROWS_AS(normal_change(base, base, {}), EmptyMask);
    const std::vector<Vec3> shorter = {Vec3(1, 0, 0)};
    CHECK_THROWS_AS(normal_change(base, shorter, all), MismatchedSizes);
}

}  // TEST_SUITE
