#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "diwr/optimizer.hpp"
#include "diwr/orientation.hpp"
#include "diwr/pcio.hpp"
#include "diwr/shapes.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace diwr;

namespace {

// unit-cube framing expected by the pipeline: the sphere spans [0,1] on
// every axis
PointCloud centered_sphere(std::size_t n) {
    return shapes::sphere_fibonacci(n, 0.5, Vec3(0.5, 0.5, 0.5));
}

OptimConfig small_config() {
    OptimConfig cfg;
    cfg.grid_resolution = 20;
    cfg.max_inner_steps_a = 30;
    cfg.max_inner_steps_c = 40;
    cfg.severity = Severity::Easy;
    return cfg;
}

std::vector<Vec3> outward_normals(const PointCloud& cloud) {
    std::vector<Vec3> truth(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        truth[i] = (cloud.positions[i] - Vec3(0.5, 0.5, 0.5)).normalized();
    return truth;
}

}  // namespace

TEST_SUITE_BEGIN("optimizer");

TEST_CASE("rmsprop reproduces the hand-run update") {
    std::vector<double> values = {1.0};
    std::vector<double> grads = {1.0};
    std::vector<double> moments = {0.0};
    rmsprop_step(values, grads, moments, 0.1, 0.9, 0.0, -10.0, 10.0);

    CHECK(moments[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(values[0] == doctest::Approx(1.0 - 0.1 / std::sqrt(0.1)).epsilon(1e-14));
}

TEST_CASE("rmsprop leaves values alone on zero gradient") {
    std::vector<double> values = {2.5, -1.0};
    std::vector<double> grads = {0.0, 0.0};
    std::vector<double> moments = {0.5, 0.08};
    rmsprop_step(values, grads, moments, 0.1, 0.9, 1e-8, -10.0, 10.0);

    CHECK(values[0] == 2.5);
    CHECK(values[1] == -1.0);
    CHECK(moments[0] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(moments[1] == doctest::Approx(0.072).epsilon(1e-15));
}

TEST_CASE("rmsprop projects onto the bounds") {
    std::vector<double> values = {0.01, 0.99};
    std::vector<double> grads = {5.0, -5.0};
    std::vector<double> moments = {0.0, 0.0};
    rmsprop_step(values, grads, moments, 0.1, 0.9, 0.0, 0.0, 1.0);

    CHECK(values[0] == 0.0);
    CHECK(values[1] == 1.0);
}

TEST_CASE("rmsprop validates its inputs") {
    std::vector<double> v2 = {1.0, 2.0};
    std::vector<double> g1 = {1.0};
    std::vector<double> g2 = {1.0, 1.0};
    std::vector<double> m1 = {0.0};
    std::vector<double> m2 = {0.0, 0.0};

    CHECK_THROWS_AS(rmsprop_step(v2, g1, m2, 0.1, 0.9, 0.0, 0.0, 1.0), MismatchedSizes);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m1, 0.1, 0.9, 0.0, 0.0, 1.0), MismatchedSizes);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m2, 0.0, 0.9, 0.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m2, 0.1, 1.0, 0.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m2, 0.1, 0.0, 0.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m2, 0.1, 0.9, -1.0, 0.0, 1.0), Error);
    CHECK_THROWS_AS(rmsprop_step(v2, g2, m2, 0.1, 0.9, 0.0, 1.0, 0.0), Error);
}

TEST_CASE("area drift averages relative change and skips zero baselines") {
    CHECK(delta_a_measure({1.15, 1.15}, {1.0, 1.0}) == doctest::Approx(0.15).epsilon(1e-14));
    CHECK(delta_a_measure({1.15, 5.0, 1.15}, {1.0, 0.0, 1.0}) ==
          doctest::Approx(0.1).epsilon(1e-14));
    CHECK(delta_a_measure({}, {}) == 0.0);
    CHECK_THROWS_AS(delta_a_measure({1.0}, {1.0, 2.0}), MismatchedSizes);
}

TEST_CASE("the lambda schedule grows and caps") {
    const OptimConfig cfg;
    CHECK(schedule_multiplier(cfg, 1) == 1.0);
    CHECK(schedule_multiplier(cfg, 2) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(schedule_multiplier(cfg, 7) == doctest::Approx(std::pow(1.25, 6)).epsilon(1e-15));
    CHECK(schedule_multiplier(cfg, 8) == 4.0);
    CHECK(schedule_multiplier(cfg, 100) == 4.0);
}

TEST_CASE("severity thresholds follow the quality bands") {
    QualityReport report;
    report.sigma_hat = 0.002;
    report.u_hat = 0.3;
    report.o_hat = 0.08;
    CHECK_FALSE(severe_regime(report));

    report.sigma_hat = 0.0021;
    CHECK(severe_regime(report));
    report.sigma_hat = 0.002;
    report.u_hat = 0.31;
    CHECK(severe_regime(report));
    report.u_hat = 0.3;
    report.o_hat = 0.081;
    CHECK(severe_regime(report));
}

TEST_CASE("zero confidence makes the area stage a no-op") {
    PointCloud cloud = centered_sphere(300);
    std::fill(cloud.confidences.begin(), cloud.confidences.end(), 0.0);
    cloud.bump();
    const std::vector<double> before = cloud.area_weights;

    const OptimConfig cfg = small_config();
    EnergyGrid grid = build_grid(cloud, cfg);
    WindingEvaluator eval(cloud, cfg.beta);
    AdjointWorkspace ws(cloud, grid);
    OptimizerState state;

    const double delta_a =
        optimize_area_stage(cloud, grid, eval, ws, state, cfg, cfg.lambda1, cfg.lambda2);
    CHECK(delta_a == 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(cloud.area_weights[i] == before[i]);
}

TEST_CASE("the area stage lowers its objective on perturbed weights") {
    PointCloud cloud = centered_sphere(800);
    Rng rng(314);
    std::uniform_real_distribution<double> jitter(0.6, 1.4);
    for (double& a : cloud.area_weights) a *= jitter(rng);
    cloud.bump();

    const OptimConfig cfg = small_config();
    EnergyGrid grid = build_grid(cloud, cfg);
    WindingEvaluator eval(cloud, cfg.beta);
    AdjointWorkspace ws(cloud, grid);
    OptimizerState state;

    const StageBaseline baseline = StageBaseline::capture(cloud);
    const std::vector<std::size_t> trusted = cloud.high_confidence_indices(cfg.tau_in);
    const double before =
        objective_area(cloud, grid, eval, baseline, trusted, cfg.lambda1, cfg.lambda2).total;

    const double delta_a =
        optimize_area_stage(cloud, grid, eval, ws, state, cfg, cfg.lambda1, cfg.lambda2);
    const double after =
        objective_area(cloud, grid, eval, state.baseline, trusted, cfg.lambda1, cfg.lambda2)
            .total;

    CHECK(after < before);
    CHECK(delta_a > 0.0);
    CHECK(delta_a == state.delta_a_history.back());
    for (double a : cloud.area_weights) CHECK(a >= 0.0);
}

TEST_CASE("the confidence stage polarizes inliers against box outliers") {
    // a surface well inside the unit box, the shape a normalized scan takes
    const Vec3 center(0.5, 0.5, 0.5);
    PointCloud cloud = shapes::sphere_fibonacci(1500, 0.3, center);
    const std::size_t inliers = cloud.size();
    Rng rng(2718);
    std::uniform_real_distribution<double> box(0.05, 0.95);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double area = cloud.area_weights[0];
    for (std::size_t j = 0; j < 225; ++j) {
        // strays within a couple of sample spacings of the surface are
        // indistinguishable from surface points, so keep them out of the
        // population whose rejection the test measures
        Vec3 p(box(rng), box(rng), box(rng));
        while (std::abs((p - center).norm() - 0.3) <= 0.07)
            p = Vec3(box(rng), box(rng), box(rng));
        cloud.positions.emplace_back(p);
        Vec3 n(gauss(rng), gauss(rng), gauss(rng));
        while (n.norm() < 1e-6) n = Vec3(gauss(rng), gauss(rng), gauss(rng));
        cloud.normals.push_back(n.normalized());
        cloud.area_weights.push_back(area);
        cloud.confidences.push_back(1.0);
        cloud.densities.push_back(0.0);
    }
    cloud.bump();

    OptimConfig cfg = small_config();
    cfg.grid_resolution = 18;
    cfg.max_inner_steps_c = 60;
    // the exclusion band must cover the field's discrete transition layer,
    // so its radius follows the fixture's sampling spacing (about 0.028)
    cfg.r_s = 0.06;
    EnergyGrid grid = build_grid(cloud, cfg);
    WindingEvaluator eval(cloud, cfg.beta);
    AdjointWorkspace ws(cloud, grid);
    OptimizerState state;

    optimize_conf_stage(cloud, grid, eval, ws, state, cfg, cfg.lambda3, cfg.lambda4,
                        cfg.lambda5);

    std::size_t outliers_low = 0;
    std::size_t inliers_high = 0;
    std::size_t undecided = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double c = cloud.confidences[i];
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        if (i < inliers && c > 0.9) ++inliers_high;
        if (i >= inliers && c < 0.1) ++outliers_low;
        if (c > 0.1 && c < 0.9) ++undecided;
    }
    CHECK(static_cast<double>(outliers_low) / 225.0 >= 0.8);
    CHECK(static_cast<double>(inliers_high) / static_cast<double>(inliers) >= 0.9);
    CHECK(static_cast<double>(undecided) / static_cast<double>(cloud.size()) < 0.1);
}

TEST_CASE("a clean cloud keeps full confidence through the stage") {
    PointCloud cloud = centered_sphere(600);

    OptimConfig cfg = small_config();
    // the exclusion band must cover the field's discrete transition layer,
    // so its radius follows the fixture's sampling spacing (about 0.072)
    cfg.r_s = 0.15;
    cfg.r_rho = 0.2;
    EnergyGrid grid = build_grid(cloud, cfg);
    WindingEvaluator eval(cloud, cfg.beta);
    AdjointWorkspace ws(cloud, grid);
    OptimizerState state;

    optimize_conf_stage(cloud, grid, eval, ws, state, cfg, cfg.lambda3, cfg.lambda4,
                        cfg.lambda5);

    for (double c : cloud.confidences) CHECK(c >= 0.9);
    CHECK(conf_energy(cloud) / static_cast<double>(cloud.size()) <= 0.01);
}

TEST_CASE("a single outer iteration respects the cap") {
    PointCloud cloud = centered_sphere(400);
    init_normals_random(cloud, 17);

    OptimConfig cfg = small_config();
    cfg.t_max = 1;
    cfg.grid_resolution = 16;
    cfg.max_inner_steps_a = 10;
    cfg.max_inner_steps_c = 10;

    const OptimizerState state = run_diwr(cloud, cfg);

    CHECK(state.t == 1);
    CHECK(state.delta_n_history.size() == 1);
    REQUIRE(state.log.size() >= 3);
    CHECK(state.log[0].stage == "orient");
    CHECK(state.log[1].stage == "area");
    CHECK(state.log.back().stage == "conf");
    for (const StageRecord& record : state.log) CHECK(record.t == 1);
    CHECK(state.e_diri_initial == state.log[0].e_diri);
    CHECK(state.e_diri_final == state.log.back().e_diri);

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(cloud.normals[i].norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(cloud.area_weights[i] >= 0.0);
        CHECK(cloud.confidences[i] >= 0.0);
        CHECK(cloud.confidences[i] <= 1.0);
    }
}

TEST_CASE("identical runs produce identical logs") {
    OptimConfig cfg = small_config();
    cfg.t_max = 1;
    cfg.grid_resolution = 16;
    cfg.max_inner_steps_a = 8;
    cfg.max_inner_steps_c = 8;

    PointCloud first = centered_sphere(350);
    init_normals_random(first, 99);
    PointCloud second = centered_sphere(350);
    init_normals_random(second, 99);

    const OptimizerState run_a = run_diwr(first, cfg);
    const OptimizerState run_b = run_diwr(second, cfg);

    REQUIRE(run_a.log.size() == run_b.log.size());
    for (std::size_t i = 0; i < run_a.log.size(); ++i) {
        CHECK(run_a.log[i].stage == run_b.log[i].stage);
        CHECK(run_a.log[i].t == run_b.log[i].t);
        CHECK(run_a.log[i].e_diri == run_b.log[i].e_diri);
        CHECK(run_a.log[i].e_surf == run_b.log[i].e_surf);
        CHECK(run_a.log[i].e_area == run_b.log[i].e_area);
        CHECK(run_a.log[i].e_conf == run_b.log[i].e_conf);
        CHECK(run_a.log[i].delta_a == run_b.log[i].delta_a);
        CHECK(run_a.log[i].delta_n == run_b.log[i].delta_n);
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first.normals[i] == second.normals[i]);
        CHECK(first.area_weights[i] == second.area_weights[i]);
        CHECK(first.confidences[i] == second.confidences[i]);
    }
}

TEST_CASE("logs and checkpoints land on disk") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "diwr_optimizer_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string log_path = (dir / "run.jsonl").string();
    const std::string ckpt_dir = (dir / "checkpoints").string();

    PointCloud cloud = centered_sphere(350);
    init_normals_random(cloud, 5);

    OptimConfig cfg = small_config();
    cfg.t_max = 1;
    cfg.grid_resolution = 16;
    cfg.max_inner_steps_a = 5;
    cfg.max_inner_steps_c = 5;

    const OptimizerState state = run_diwr(cloud, cfg, log_path, ckpt_dir);

    std::ifstream log_file(log_path);
    REQUIRE(log_file.good());
    std::size_t lines = 0;
    std::string line;
    while (std::getline(log_file, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("t"));
        CHECK(j.contains("stage"));
        CHECK(j.contains("e_diri"));
        CHECK(j.contains("delta_n"));
        CHECK(j.contains("wallclock_ms"));
        ++lines;
    }
    CHECK(lines == state.log.size());

    const PointCloud restored = load_points(ckpt_dir + "/checkpoint_t01.ply");
    CHECK(restored.size() == cloud.size());
    CHECK(restored.confidences[7] == doctest::Approx(cloud.confidences[7]).epsilon(1e-12));

    fs::remove_all(dir);
}

TEST_CASE("non-finite state aborts the run") {
    PointCloud cloud = centered_sphere(120);
    cloud.area_weights[0] = std::numeric_limits<double>::quiet_NaN();
    cloud.bump();

    OptimConfig cfg = small_config();
    cfg.grid_resolution = 16;
    try {
        run_diwr(cloud, cfg);
        FAIL("expected a non-finite abort");
    } catch (const NonFiniteEnergy& abort) {
        CHECK(abort.detail().find("t=1") != std::string::npos);
        CHECK(std::string(abort.what()).find("non-finite") != std::string::npos);
    }
}

TEST_CASE("run preconditions are enforced") {
    PointCloud uninitialized = centered_sphere(100);
    for (Vec3& n : uninitialized.normals) n = Vec3::Zero();
    uninitialized.bump();
    CHECK_THROWS_AS(run_diwr(uninitialized, small_config()), Error);

    PointCloud tiny = centered_sphere(100);
    tiny.positions.resize(3);
    tiny.normals.resize(3);
    tiny.area_weights.resize(3);
    tiny.confidences.resize(3);
    tiny.densities.resize(3);
    tiny.bump();
    CHECK_THROWS_AS(run_diwr(tiny, small_config()), TooFewPoints);

    PointCloud lopsided = centered_sphere(100);
    lopsided.normals.resize(50);
    lopsided.bump();
    CHECK_THROWS_AS(run_diwr(lopsided, small_config()), MismatchedSizes);

    PointCloud cloud = centered_sphere(100);
    OptimConfig bad = small_config();
    bad.t_max = 0;
    CHECK_THROWS_AS(run_diwr(cloud, bad), Error);
    bad = small_config();
    bad.tau_in = 0.0;
    CHECK_THROWS_AS(run_diwr(cloud, bad), Error);
    bad = small_config();
    bad.rmsprop.decay = 1.0;
    CHECK_THROWS_AS(run_diwr(cloud, bad), Error);
}

TEST_CASE("the clean sphere run converges by the normal-change rule") {
    PointCloud cloud = centered_sphere(1200);
    init_normals_random(cloud, 42);
    const std::vector<Vec3> truth = outward_normals(cloud);

    OptimConfig cfg = small_config();
    cfg.grid_resolution = 24;
    cfg.max_inner_steps_a = 40;
    cfg.max_inner_steps_c = 40;
    // band radius scaled to the fixture's sampling spacing (about 0.051)
    cfg.r_s = 0.1;
    cfg.r_rho = 0.15;

    const OptimizerState state = run_diwr(cloud, cfg);

    CHECK(state.t <= 5);
    CHECK(state.delta_n_history.back() <= cfg.eps_n);

    std::size_t aligned = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.normals[i].dot(truth[i]) > 0.0) ++aligned;
    CHECK(static_cast<double>(aligned) / static_cast<double>(cloud.size()) >= 0.99);

    for (const StageRecord& record : state.log) {
        CHECK(std::isfinite(record.e_diri));
        CHECK(record.e_diri >= 0.0);
        CHECK(record.e_surf >= 0.0);
    }
}

TEST_SUITE_END();
