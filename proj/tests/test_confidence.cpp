#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "diwr/confidence.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace diwr;

namespace {

PointCloud make_cloud(const std::vector<Vec3>& positions) {
    PointCloud cloud;
    cloud.positions = positions;
    cloud.reset_state();
    return cloud;
}

// exhaustive one-dimensional 2-means: every optimal clustering is a split of
// the sorted order, so trying the n-1 thresholds and scoring the
// within-cluster squared error finds the global optimum
std::vector<std::uint8_t> brute_bimeans(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double best_cost = std::numeric_limits<double>::max();
    std::size_t best_split = 1;
    double best_low = 0.0, best_high = 0.0;
    for (std::size_t split = 1; split < n; ++split) {
        double m_low = 0.0, m_high = 0.0;
        for (std::size_t k = 0; k < split; ++k) m_low += values[order[k]];
        for (std::size_t k = split; k < n; ++k) m_high += values[order[k]];
        m_low /= static_cast<double>(split);
        m_high /= static_cast<double>(n - split);
        double cost = 0.0;
        for (std::size_t k = 0; k < split; ++k)
            cost += (values[order[k]] - m_low) * (values[order[k]] - m_low);
        for (std::size_t k = split; k < n; ++k)
            cost += (values[order[k]] - m_high) * (values[order[k]] - m_high);
        if (cost < best_cost) {
            best_cost = cost;
            best_split = split;
            best_low = m_low;
            best_high = m_high;
        }
    }

    double global = 0.0;
    for (double v : values) global += v;
    global /= static_cast<double>(n);

    const bool high_is_outlier =
        std::abs(best_high - global) >= std::abs(best_low - global);
    std::vector<std::uint8_t> flags(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const bool in_high = k >= best_split;
        flags[order[k]] = in_high == high_is_outlier ? 1 : 0;
    }
    return flags;
}

int brute_density(const PointCloud& cloud, std::size_t i, double r) {
    int count = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        if (j == i) continue;
        if ((cloud.positions[j] - cloud.positions[i]).norm() <= r) ++count;
    }
    return count;
}

}  // namespace

TEST_SUITE("confidence") {

TEST_CASE("two-means isolates the far value") {
    ConfidenceResetReport report;
    const std::vector<double> values = {0.1, 0.1, 0.9};
    const std::vector<std::uint8_t> flags = bimeans_split(values, &report);

    CHECK(flags == std::vector<std::uint8_t>{0, 0, 1});
    CHECK(flags == brute_bimeans(values));
    CHECK(report.global_mean == doctest::Approx((0.1 + 0.1 + 0.9) / 3).epsilon(1e-14));
    CHECK(report.outlier_cluster_mean == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(report.inlier_cluster_mean == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("two-means flags a single extreme among near-constant values") {
    const std::vector<double> values = {0.45, 0.5, 0.55, 3.0};
    const std::vector<std::uint8_t> flags = bimeans_split(values);
    CHECK(flags == std::vector<std::uint8_t>{0, 0, 0, 1});
    CHECK(flags == brute_bimeans(values));
}

TEST_CASE("all-equal values produce no outliers") {
    ConfidenceResetReport report;
    const std::vector<double> values(17, 0.42);
    const std::vector<std::uint8_t> flags = bimeans_split(values, &report);
    CHECK(std::count(flags.begin(), flags.end(), 1) == 0);
    CHECK(report.global_mean == doctest::Approx(0.42).epsilon(1e-14));
}

TEST_CASE("two-means matches the exhaustive split when a mode is detached") {
    // with a gap between the modes the min/max-seeded iteration lands on the
    // gap split immediately, which is also the exhaustive optimum
    for (const std::uint64_t seed : {2u, 4u, 6u, 8u, 10u, 12u}) {
        Rng rng(seed);
        std::uniform_int_distribution<int> size_dist(5, 60);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> spike(4.0, 0.2);
        const int n = size_dist(rng);
        std::vector<double> values(n);
        for (double& v : values) v = u(rng);
        for (int k = 0; k < n / 8 + 1; ++k) values[static_cast<std::size_t>(k)] = spike(rng);

        CAPTURE(seed);
        CHECK(bimeans_split(values) == brute_bimeans(values));
    }
}

TEST_CASE("two-means settles on a stable labeled partition") {
    // on unimodal data the seeded iteration is only a local minimizer, so the
    // exhaustive optimum is not the right oracle; the fixed-point conditions
    // and the outlier designation rule are what must hold
    for (const std::uint64_t seed : {1u, 3u, 5u, 7u, 9u, 11u}) {
        Rng rng(seed);
        std::uniform_int_distribution<int> size_dist(5, 60);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int n = size_dist(rng);
        std::vector<double> values(n);
        for (double& v : values) v = u(rng);

        ConfidenceResetReport report;
        const std::vector<std::uint8_t> flags = bimeans_split(values, &report);
        CAPTURE(seed);

        double sum_in = 0.0, sum_out = 0.0;
        double max_in = -1e300, min_in = 1e300, max_out = -1e300, min_out = 1e300;
        std::size_t n_in = 0, n_out = 0;
        for (int i = 0; i < n; ++i) {
            const double v = values[static_cast<std::size_t>(i)];
            if (flags[static_cast<std::size_t>(i)]) {
                sum_out += v;
                ++n_out;
                max_out = std::max(max_out, v);
                min_out = std::min(min_out, v);
            } else {
                sum_in += v;
                ++n_in;
                max_in = std::max(max_in, v);
                min_in = std::min(min_in, v);
            }
        }
        REQUIRE(n_in > 0);
        REQUIRE(n_out > 0);
        const double m_in = sum_in / static_cast<double>(n_in);
        const double m_out = sum_out / static_cast<double>(n_out);

        // clusters occupy disjoint value ranges
        CHECK((max_in < min_out || max_out < min_in));
        // every value sits at least as close to its own cluster mean
        for (int i = 0; i < n; ++i) {
            const double v = values[static_cast<std::size_t>(i)];
            const double own = flags[static_cast<std::size_t>(i)] ? m_out : m_in;
            const double other = flags[static_cast<std::size_t>(i)] ? m_in : m_out;
            CHECK(std::abs(v - own) <= std::abs(v - other) + 1e-12);
        }
        // the flagged cluster deviates at least as far from the global mean
        CHECK(std::abs(m_out - report.global_mean) >=
              std::abs(m_in - report.global_mean) - 1e-12);
        CHECK(report.outlier_cluster_mean == doctest::Approx(m_out).epsilon(1e-12));
        CHECK(report.inlier_cluster_mean == doctest::Approx(m_in).epsilon(1e-12));
    }
}

TEST_CASE("equal deviation from the mean flags the higher cluster") {
    // two symmetric clusters around the mean deviate identically
    const std::vector<double> values = {0.0, 0.0, 1.0, 1.0};
    const std::vector<std::uint8_t> flags = bimeans_split(values);
    CHECK(flags == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("label multiset survives permutation") {
    Rng rng(99);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> values(40);
    for (double& v : values) v = u(rng);

    std::vector<std::uint8_t> flags = bimeans_split(values);

    std::vector<std::size_t> perm(values.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(values.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = values[perm[i]];

    const std::vector<std::uint8_t> shuffled_flags = bimeans_split(shuffled);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(shuffled_flags[i] == flags[perm[i]]);
}

TEST_CASE("density of an isolated point is zero") {
    PointCloud cloud = make_cloud({{0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}});
    compute_densities(cloud, 0.06);
    CHECK(cloud.densities == std::vector<int>{0, 0});
}

TEST_CASE("density counts are symmetric and boundary inclusive") {
    // exactly representable radius so the boundary case is deterministic
    PointCloud cloud = make_cloud({{0.2, 0.2, 0.2}, {0.2625, 0.2, 0.2}, {0.9, 0.9, 0.9}});
    compute_densities(cloud, 0.0625);
    CHECK(cloud.densities == std::vector<int>{1, 1, 0});
}

TEST_CASE("density matches the quadratic-time count on random clouds") {
    Rng rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(300);
    for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    PointCloud cloud = make_cloud(pts);

    for (const double r : {0.03, 0.06, 0.15}) {
        compute_densities(cloud, r);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            CHECK(cloud.densities[i] == brute_density(cloud, i, r));
    }
}

TEST_CASE("mean density over a uniform cube tracks the ball volume") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 10000;
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    PointCloud cloud = make_cloud(pts);

    const double r = 0.06;
    compute_densities(cloud, r);
    double mean = 0.0;
    for (int rho : cloud.densities) mean += rho;
    mean /= static_cast<double>(n);

    const double interior = static_cast<double>(n) * (4.0 / 3.0) * std::numbers::pi * r * r * r;
    CHECK(std::abs(mean - interior) <= 0.15 * interior);
}

TEST_CASE("one level averages the binary labels") {
    PointCloud cloud = make_cloud(
        {{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}, {0.4, 0.4, 0.4}});
    cloud.densities = {3, 3, 3, 3};

    // winding values far from their mean keep every point unprotected
    const std::vector<double> winding = {0.0, 0.0, 1.0, 1.0};
    const std::vector<std::uint8_t> flags = {1, 1, 0, 0};
    ConfidenceResetReport report;
    const std::vector<double> conf = density_stratified_reset(cloud, flags, winding, &report);

    CHECK(conf == std::vector<double>{0.5, 0.5, 0.5, 0.5});
    CHECK(report.protected_count == 0);
    CHECK(report.level_means[0] == 0.5);
}

TEST_CASE("a winding value near the mean shields the prior confidence") {
    PointCloud cloud =
        make_cloud({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}});
    cloud.densities = {1, 1, 1};
    cloud.confidences = {0.73, 1.0, 1.0};
    cloud.bump();

    // mean is 0.35; the first value sits 0.05 away and is protected
    const std::vector<double> winding = {0.4, 1.0, -0.35};
    const std::vector<std::uint8_t> flags = {1, 0, 0};
    ConfidenceResetReport report;
    const std::vector<double> conf = density_stratified_reset(cloud, flags, winding, &report);

    CHECK(conf[0] == 0.73);
    CHECK(conf[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(conf[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(report.protected_count == 1);
}

TEST_CASE("levels average independently") {
    PointCloud cloud = make_cloud({{0.1, 0.1, 0.1},
                                   {0.2, 0.2, 0.2},
                                   {0.3, 0.3, 0.3},
                                   {0.4, 0.4, 0.4},
                                   {0.5, 0.5, 0.5}});
    // three low-density points land in level 0, two high-density in level 127
    cloud.densities = {0, 0, 0, 127, 127};

    const std::vector<double> winding = {0.0, 0.0, 0.0, 1.0, 1.0};
    const std::vector<std::uint8_t> flags = {0, 0, 1, 1, 1};
    ConfidenceResetReport report;
    const std::vector<double> conf = density_stratified_reset(cloud, flags, winding, &report);

    CHECK(conf[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(conf[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(conf[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(conf[3] == 0.0);
    CHECK(conf[4] == 0.0);
    CHECK(report.level_means[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(report.level_means[127] == 0.0);
    for (int lv = 1; lv < 127; ++lv) CHECK(report.level_means[lv] == 1.0);
}

TEST_CASE("no outliers means full confidence for unprotected points") {
    PointCloud cloud = make_cloud({{0.1, 0.1, 0.1}, {0.5, 0.5, 0.5}, {0.9, 0.9, 0.9}});
    cloud.densities = {2, 5, 9};
    cloud.confidences = {0.2, 0.2, 0.2};
    cloud.bump();

    // asymmetric values keep every point away from the mean
    const std::vector<double> winding = {0.0, 1.0, 5.0};
    const std::vector<std::uint8_t> flags = {0, 0, 0};
    const std::vector<double> conf = density_stratified_reset(cloud, flags, winding);
    CHECK(conf == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("reset output stays within the unit interval") {
    Rng rng(314);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> w(-1.5, 2.5);
    std::vector<Vec3> pts(400);
    for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    PointCloud cloud = make_cloud(pts);
    for (double& c : cloud.confidences) c = u(rng);
    compute_densities(cloud, 0.06);

    std::vector<double> winding(cloud.size());
    for (double& v : winding) v = w(rng);

    const ConfidenceResetReport report = reset_confidences(cloud, winding);
    for (double c : cloud.confidences) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
    CHECK(report.protected_count <= cloud.size());
    REQUIRE(report.level_means.size() == kDensityLevels);
    for (double m : report.level_means) {
        CHECK(m >= 0.0);
        CHECK(m <= 1.0);
    }
}

TEST_CASE("confidence multiset survives permutation") {
    Rng rng(2718);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> w(-0.5, 1.5);
    std::vector<Vec3> pts(120);
    for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    PointCloud cloud = make_cloud(pts);
    for (double& c : cloud.confidences) c = u(rng);
    compute_densities(cloud, 0.1);
    std::vector<double> winding(cloud.size());
    for (double& v : winding) v = w(rng);

    PointCloud permuted = cloud;
    std::vector<std::size_t> perm(cloud.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted_winding(cloud.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        permuted.positions[i] = cloud.positions[perm[i]];
        permuted.confidences[i] = cloud.confidences[perm[i]];
        permuted.densities[i] = cloud.densities[perm[i]];
        permuted_winding[i] = winding[perm[i]];
    }
    permuted.bump();

    reset_confidences(cloud, winding);
    reset_confidences(permuted, permuted_winding);

    std::vector<double> a = cloud.confidences;
    std::vector<double> b = permuted.confidences;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("reset report serializes to JSON") {
    PointCloud cloud = make_cloud({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}});
    cloud.densities = {1, 1, 1};
    const ConfidenceResetReport report = reset_confidences(cloud, {0.1, 0.15, 0.9});

    const nlohmann::json j = nlohmann::json::parse(report_json(report));
    CHECK(j["global_mean"].get<double>() ==
          doctest::Approx((0.1 + 0.15 + 0.9) / 3).epsilon(1e-14));
    CHECK(j["protected_count"].get<std::size_t>() == report.protected_count);
    CHECK(j["level_means"].size() == kDensityLevels);
    CHECK(j["outlier_cluster_mean"].get<double>() == doctest::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("size mismatches are rejected") {
    PointCloud cloud = make_cloud({{0.1, 0.1, 0.1}, {0.2, 0.2, 0.2}});
    cloud.densities = {1, 1};
    CHECK_THROWS_AS(density_stratified_reset(cloud, {0}, {0.1, 0.2}), MismatchedSizes);
    CHECK_THROWS_AS(density_stratified_reset(cloud, {0, 1}, {0.1}), MismatchedSizes);
    cloud.densities = {1};
    CHECK_THROWS_AS(density_stratified_reset(cloud, {0, 1}, {0.1, 0.2}), MismatchedSizes);
}

}  // TEST_SUITE
