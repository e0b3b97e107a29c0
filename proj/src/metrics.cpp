#include "diwr/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "diwr/kdtree.hpp"
#include "json.hpp"

namespace diwr {

namespace {

constexpr int kMinNeighbors = 10;
constexpr int kMaxNeighbors = 40;

// both surfaces of a mesh-to-mesh comparison sample with this seed, so the
// comparison is symmetric and self-comparison is exact
constexpr std::uint64_t kSampleSeed = 0x5u;

double median_of(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_nearest(const std::vector<Vec3>& queries, const KdTree& tree) {
    return parallel_sum(queries.size(),
                        [&](std::size_t i) { return tree.nearest_dist(queries[i]); }) /
           static_cast<double>(queries.size());
}

}  // namespace

std::string report_json(const QualityReport& report) {
    nlohmann::json j;
    j["s_hat"] = report.s_hat;
    j["sigma_hat"] = report.sigma_hat;
    j["u_hat"] = report.u_hat;
    j["o_hat"] = report.o_hat;
    j["k"] = report.k;
    j["trim_tau"] = report.trim_tau;
    return j.dump();
}

QualityReport quality_measures(const PointCloud& cloud, int k, double trim_tau) {
    if (k < kMinNeighbors || k > kMaxNeighbors)
        throw Error("quality measures need 10 <= k <= 40");
    if (!(trim_tau >= 0.0 && trim_tau < 50.0))
        throw Error("trim percentage must lie in [0, 50)");
    const std::size_t n = cloud.size();
    if (n <= static_cast<std::size_t>(k)) throw TooFewPoints(n, static_cast<std::size_t>(k) + 1);

    const KdTree tree(cloud.positions);
    std::vector<double> spacing(n);
    std::vector<double> residual(n);
    parallel_for(n, [&](std::size_t i) {
        std::vector<int> nb;
        tree.knn(cloud.positions[i], k, nb, static_cast<int>(i));

        double dist_sum = 0.0;
        Vec3 centroid = Vec3::Zero();
        for (int j : nb) {
            dist_sum += (cloud.positions[i] - cloud.positions[j]).norm();
            centroid += cloud.positions[j];
        }
        spacing[i] = dist_sum / static_cast<double>(k);
        centroid /= static_cast<double>(nb.size());

        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int j : nb) {
            const Vec3 d = cloud.positions[j] - centroid;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        const Vec3 plane_normal = es.eigenvectors().col(0);
        double sq_sum = 0.0;
        for (int j : nb) {
            const double d = plane_normal.dot(cloud.positions[j] - centroid);
            sq_sum += d * d;
        }
        residual[i] = std::sqrt(sq_sum / static_cast<double>(k));
    });

    QualityReport report;
    report.k = k;
    report.trim_tau = trim_tau;
    {
        std::vector<double> tmp = spacing;
        report.s_hat = median_of(tmp);
        tmp = residual;
        report.sigma_hat = median_of(tmp);
    }

    std::vector<double> sorted = spacing;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t cut = static_cast<std::size_t>(static_cast<double>(n) * trim_tau / 100.0);
    const std::size_t kept = n - 2 * cut;
    double trimmed_mean = 0.0;
    for (std::size_t i = cut; i < n - cut; ++i) trimmed_mean += sorted[i];
    trimmed_mean /= static_cast<double>(kept);
    double trimmed_var = 0.0;
    for (std::size_t i = cut; i < n - cut; ++i) {
        const double d = sorted[i] - trimmed_mean;
        trimmed_var += d * d;
    }
    if (kept > 1 && trimmed_mean > 0.0)
        report.u_hat = std::sqrt(trimmed_var / static_cast<double>(kept - 1)) / trimmed_mean;

    double mean = 0.0;
    for (double s : spacing) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : spacing) {
        const double d = s - mean;
        var += d * d;
    }
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    std::size_t sparse = 0;
    for (double s : spacing)
        if (s > mean + 2.0 * sd) ++sparse;
    report.o_hat = static_cast<double>(sparse) / static_cast<double>(n);
    return report;
}

SampledSurface sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
    if (mesh.faces.empty()) throw EmptyInput("mesh has no faces");

    std::vector<double> cumulative(mesh.faces.size());
    std::vector<Vec3> face_normals(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3& a = mesh.vertices[mesh.faces[f][0]];
        const Vec3& b = mesh.vertices[mesh.faces[f][1]];
        const Vec3& c = mesh.vertices[mesh.faces[f][2]];
        const Vec3 cross = (b - a).cross(c - a);
        const double doubled = cross.norm();
        total += 0.5 * doubled;
        cumulative[f] = total;
        face_normals[f] = doubled > 0.0 ? Vec3(cross / doubled) : Vec3::Zero();
    }
    if (total <= 0.0) throw EmptyInput("mesh has zero total area");

    SampledSurface out;
    out.positions.resize(count);
    out.normals.resize(count);
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < count; ++s) {
        const double pick = unit(rng) * total;
        const std::size_t f = static_cast<std::size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        const std::size_t face = std::min(f, mesh.faces.size() - 1);
        const Vec3& a = mesh.vertices[mesh.faces[face][0]];
        const Vec3& b = mesh.vertices[mesh.faces[face][1]];
        const Vec3& c = mesh.vertices[mesh.faces[face][2]];
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        out.positions[s] = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
        out.normals[s] = face_normals[face];
    }
    return out;
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty()) throw EmptyInput("first point set of a chamfer comparison");
    if (b.empty()) throw EmptyInput("second point set of a chamfer comparison");
    const KdTree tree_a(a);
    const KdTree tree_b(b);
    return 0.5 * (mean_nearest(a, tree_b) + mean_nearest(b, tree_a));
}

double chamfer(const TriMesh& a, const TriMesh& b, std::size_t sample_count) {
    if (sample_count == 0) throw EmptyInput("chamfer sample budget");
    return chamfer(sample_surface(a, sample_count, kSampleSeed).positions,
                   sample_surface(b, sample_count, kSampleSeed).positions);
}

double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t sample_count) {
    if (sample_count == 0) throw EmptyInput("normal consistency sample budget");
    const SampledSurface sa = sample_surface(a, sample_count, kSampleSeed);
    const SampledSurface sb = sample_surface(b, sample_count, kSampleSeed);
    const KdTree tree_a(sa.positions);
    const KdTree tree_b(sb.positions);

    const auto one_side = [](const SampledSurface& from, const SampledSurface& to,
                             const KdTree& to_tree) {
        return parallel_sum(from.positions.size(),
                            [&](std::size_t i) {
                                const int j = to_tree.nearest_index(from.positions[i]);
                                return std::abs(from.normals[i].dot(to.normals[j]));
                            }) /
               static_cast<double>(from.positions.size());
    };
    return 0.5 * (one_side(sa, sb, tree_b) + one_side(sb, sa, tree_a));
}

OrientationError orientation_error(const std::vector<Vec3>& normals,
                                   const std::vector<Vec3>& ground_truth) {
    if (normals.size() != ground_truth.size())
        throw MismatchedSizes(normals.size(), ground_truth.size());
    if (normals.empty()) throw EmptyInput("orientation comparison");

    const std::size_t n = normals.size();
    OrientationError out;
    out.mean_angle_deg = parallel_sum(n,
                                      [&](std::size_t i) {
                                          const double d = std::clamp(
                                              normals[i].dot(ground_truth[i]), -1.0, 1.0);
                                          return std::acos(d);
                                      }) /
                         static_cast<double>(n) * (180.0 / std::numbers::pi);
    out.flip_fraction = parallel_sum(n,
                                     [&](std::size_t i) {
                                         return normals[i].dot(ground_truth[i]) < 0.0 ? 1.0 : 0.0;
                                     }) /
                        static_cast<double>(n);
    return out;
}

}  // namespace diwr
