#include "diwr/orientation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "diwr/kdtree.hpp"

namespace diwr {

namespace {

constexpr int kDiscSides = 64;       // polygon resolution of the bounding disc
constexpr int kSignProbes = 32;      // probes per side for the sign post-pass
constexpr double kWeakGradient = 1e-10;

// Consensus schedule inside update_normals. The raw gradient at a point is
// ruled by its nearest neighbors, so from disordered normals plain sweeps
// only ever reach local agreement and opposing patches survive far beyond
// any reasonable sweep budget. The early sweeps therefore align against a
// width-softened field, starting wide enough that every point feels the
// whole cloud and halving the width after a few sweeps at each level until
// it reaches the sampling scale; the remaining sweeps use the true field.
// Widths above the sampling scale tolerate a strided source subsample,
// which keeps the softened sums affordable.
constexpr double kSmoothStartFrac = 0.4;    // first width over the cloud extent
constexpr double kSmoothDecay = 0.5;        // width ratio between levels
constexpr int kSmoothLevelSweeps = 3;       // sweeps spent at each width
constexpr double kSmoothFloorFactor = 2.0;  // lowest width in sampling-scale units
constexpr double kSmoothMinSample = 1024.0;
constexpr double kSmoothMaxSample = 20000.0;
constexpr double kSmoothSampleFactor = 4.0;  // samples per width across the extent
constexpr double kCoherentSkip = 0.9;        // |mean cos| that skips the softened phase
constexpr std::size_t kCoherenceProbes = 256;

using Vec2 = Eigen::Vector2d;

// clips the polygon against the half-plane normal.dot(x) <= offset,
// keeping winding order
void clip_half_plane(std::vector<Vec2>& poly, const Vec2& normal, double offset,
                     std::vector<Vec2>& scratch) {
    scratch.clear();
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % m];
        const double da = normal.dot(a) - offset;
        const double db = normal.dot(b) - offset;
        if (da <= 0.0) scratch.push_back(a);
        if ((da < 0.0) != (db < 0.0) && da != db)
            scratch.push_back(a + (da / (da - db)) * (b - a));
    }
    poly.swap(scratch);
}

double polygon_area(const std::vector<Vec2>& poly) {
    double twice = 0.0;
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % m];
        twice += a.x() * b.y() - a.y() * b.x();
    }
    return 0.5 * std::abs(twice);
}

// area of the clipped 2-D Voronoi cell of `self` among its neighbors, or a
// negative value when the neighborhood does not define a plane
double voronoi_cell_area(const Vec3& self, const std::vector<Vec3>& neighbors) {
    Vec3 centroid = self;
    for (const Vec3& p : neighbors) centroid += p;
    centroid /= static_cast<double>(neighbors.size() + 1);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    const Vec3 ds = self - centroid;
    cov += ds * ds.transpose();
    for (const Vec3& p : neighbors) {
        const Vec3 d = p - centroid;
        cov += d * d.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Vec3 evals = es.eigenvalues();  // ascending
    if (!(evals[1] > 1e-12 * evals[2]) || !(evals[2] > 0.0)) return -1.0;
    const Vec3 u = es.eigenvectors().col(2);
    const Vec3 v = es.eigenvectors().col(1);

    const Vec2 site(u.dot(ds), v.dot(ds));
    double disc_radius = site.norm();
    std::vector<Vec2> sites(neighbors.size());
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        const Vec3 d = neighbors[j] - centroid;
        sites[j] = Vec2(u.dot(d), v.dot(d));
        disc_radius = std::max(disc_radius, sites[j].norm());
    }
    if (disc_radius <= 0.0) return -1.0;

    std::vector<Vec2> poly;
    poly.reserve(kDiscSides);
    for (int s = 0; s < kDiscSides; ++s) {
        const double ang = 2.0 * std::numbers::pi * s / kDiscSides;
        poly.emplace_back(disc_radius * std::cos(ang), disc_radius * std::sin(ang));
    }

    std::vector<Vec2> scratch;
    scratch.reserve(kDiscSides + 4);
    for (const Vec2& other : sites) {
        const Vec2 d = other - site;
        const double d2 = d.squaredNorm();
        if (d2 < 1e-24) continue;  // coincident site constrains nothing
        // bisector: keep the side of `site`
        clip_half_plane(poly, d, d.dot(site) + 0.5 * d2, scratch);
        if (poly.empty()) return 0.0;
    }
    return polygon_area(poly);
}

// gradient of the width-softened field at cloud point `self`, summed over a
// strided source subsample with its own contribution excluded
Vec3 smoothed_gradient(const PointCloud& cloud, std::size_t self, double width,
                       std::size_t stride, double scale) {
    const double eps2 = width * width;
    const Vec3& q = cloud.positions[self];
    Vec3 acc = Vec3::Zero();
    for (std::size_t j = 0; j < cloud.size(); j += stride) {
        if (j == self) continue;
        const Vec3 m = cloud.area_weights[j] * cloud.confidences[j] * cloud.normals[j];
        const double s2 = (cloud.positions[j] - q).squaredNorm() + eps2;
        const double inv_s2 = 1.0 / s2;
        acc += kernel_gradient(cloud.positions[j], m, q, inv_s2 / std::sqrt(s2), inv_s2);
    }
    return scale * acc;
}

double median_of(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

}  // namespace

void init_normals_random(PointCloud& cloud, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6f7269656e74ull));
    std::normal_distribution<double> g;
    cloud.normals.resize(cloud.size());
    for (Vec3& n : cloud.normals) {
        Vec3 v(g(rng), g(rng), g(rng));
        double len = v.norm();
        while (len < 1e-12) {
            v = Vec3(g(rng), g(rng), g(rng));
            len = v.norm();
        }
        n = v / len;
    }
    cloud.bump();
}

void init_area_voronoi(PointCloud& cloud, int k) {
    const std::size_t n = cloud.size();
    if (k < 3 || static_cast<std::size_t>(k) >= n)
        throw Error("voronoi area init needs 3 <= k < point count");

    const KdTree tree(cloud.positions);
    std::vector<double> area(n, -1.0);
    parallel_for(n, [&](std::size_t i) {
        std::vector<int> nb;
        tree.knn(cloud.positions[i], k, nb, static_cast<int>(i));
        std::vector<Vec3> neighbors(nb.size());
        for (std::size_t j = 0; j < nb.size(); ++j)
            neighbors[j] = cloud.positions[static_cast<std::size_t>(nb[j])];
        area[i] = voronoi_cell_area(cloud.positions[i], neighbors);
    });

    double defined_sum = 0.0;
    std::size_t defined = 0;
    for (double a : area) {
        if (a >= 0.0) {
            defined_sum += a;
            ++defined;
        }
    }
    if (defined == 0) throw DegenerateNeighborhood();
    const double fallback = defined_sum / static_cast<double>(defined);
    for (double& a : area)
        if (a < 0.0) a = fallback;

    cloud.area_weights = std::move(area);
    cloud.bump();
}

void init_area_uniform(PointCloud& cloud) {
    cloud.area_weights.assign(cloud.size(), 1.0);
    cloud.bump();
}

double update_normals(PointCloud& cloud, WindingEvaluator& eval,
                      const OrientationUpdateConfig& cfg, double r_s) {
    const std::size_t n = cloud.size();
    if (n == 0) return 0.0;
    eval.refresh();

    // rotation-invariant cloud size, so the schedule commutes with rigid motions
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.positions) centroid += p;
    centroid /= static_cast<double>(n);
    double rms2 = 0.0;
    for (const Vec3& p : cloud.positions) rms2 += (p - centroid).squaredNorm();
    const double extent = 2.0 * std::sqrt(rms2 / static_cast<double>(n));

    // normals that already follow the field, in either global polarity, skip
    // the softened phase, so repeated calls refine instead of starting over
    double cos_sum = 0.0;
    std::size_t cos_count = 0;
    const std::size_t probe_step = std::max<std::size_t>(1, n / kCoherenceProbes);
    for (std::size_t i = 0; i < n; i += probe_step) {
        const Vec3 g = eval.gradient(cloud.positions[i], Singular::Skip);
        const double gn = g.norm();
        if (gn < kWeakGradient) continue;
        cos_sum -= cloud.normals[i].dot(g) / gn;
        ++cos_count;
    }
    const bool coherent =
        cos_count > 0 && std::abs(cos_sum / static_cast<double>(cos_count)) > kCoherentSkip;

    // per-sweep smoothing widths, wide to zero; zero means the true field
    std::vector<double> widths(static_cast<std::size_t>(cfg.inner_iters), 0.0);
    if (!coherent && n > 1) {
        const double spacing = extent / std::sqrt(static_cast<double>(n));
        const double floor_width = std::max(kSmoothFloorFactor * spacing,
                                            2.0 * extent / std::sqrt(kSmoothMaxSample));
        std::size_t s = 0;
        for (double w = kSmoothStartFrac * extent; w > floor_width && s < widths.size();
             w *= kSmoothDecay)
            for (int r = 0; r < kSmoothLevelSweeps && s < widths.size(); ++r) widths[s++] = w;
    }

    std::vector<Vec3> next(n);
    double last_change = 0.0;
    for (int sweep = 0; sweep < cfg.inner_iters; ++sweep) {
        const double width = widths[static_cast<std::size_t>(sweep)];
        eval.refresh();
        std::size_t stride = 1;
        double scale = 1.0;
        if (width > 0.0) {
            const double ratio = kSmoothSampleFactor * extent / width;
            const double target = std::clamp(ratio * ratio, kSmoothMinSample, kSmoothMaxSample);
            stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(target));
            double weight_all = 0.0;
            double weight_sampled = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double wj = cloud.area_weights[j] * cloud.confidences[j];
                weight_all += wj;
                if (j % stride == 0) weight_sampled += wj;
            }
            if (weight_sampled > 0.0) scale = weight_all / weight_sampled;
        }
        parallel_for(n, [&](std::size_t i) {
            const Vec3 g = width > 0.0
                               ? smoothed_gradient(cloud, i, width, stride, scale)
                               : eval.gradient(cloud.positions[i], Singular::Skip);
            const double gn = g.norm();
            if (gn < kWeakGradient) {
                next[i] = cloud.normals[i];
                return;
            }
            const Vec3 blended =
                (1.0 - cfg.blend) * cloud.normals[i] - cfg.blend * (g / gn);
            const double bn = blended.norm();
            next[i] = bn < 1e-14 ? cloud.normals[i] : Vec3(blended / bn);
        });
        const double sum = parallel_sum(n, [&](std::size_t i) {
            return std::acos(std::clamp(cloud.normals[i].dot(next[i]), -1.0, 1.0));
        });
        last_change = sum / static_cast<double>(n);
        cloud.normals.swap(next);
        cloud.bump();
        // a softened sweep can settle into its own width's equilibrium, so
        // only true-field sweeps may end the loop
        if (width == 0.0 && last_change < cfg.change_tolerance) break;
    }
    eval.refresh();

    // global sign: probe the field a step behind and a step in front of the
    // most trusted points. The enclosed region dominates the sum of the two
    // medians (the far side sits near zero), and a negative enclosed side
    // means the normals point away from it, so all of them flip.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const std::size_t probes = std::min<std::size_t>(kSignProbes, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(probes),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          if (cloud.confidences[a] != cloud.confidences[b])
                              return cloud.confidences[a] > cloud.confidences[b];
                          return a < b;
                      });
    std::vector<double> behind(probes);
    std::vector<double> front(probes);
    for (std::size_t j = 0; j < probes; ++j) {
        const std::size_t i = order[j];
        const Vec3 offset = 2.0 * r_s * cloud.normals[i];
        behind[j] = eval.eval(cloud.positions[i] - offset, Singular::Skip);
        front[j] = eval.eval(cloud.positions[i] + offset, Singular::Skip);
    }
    if (median_of(behind) + median_of(front) < 0.0) {
        for (Vec3& nrm : cloud.normals) nrm = -nrm;
        cloud.bump();
        eval.refresh();
    }
    return last_change;
}

double normal_change(const std::vector<Vec3>& old_normals,
                     const std::vector<Vec3>& new_normals,
                     const std::vector<std::size_t>& mask) {
    if (old_normals.size() != new_normals.size())
        throw MismatchedSizes(old_normals.size(), new_normals.size());
    if (mask.empty()) throw EmptyMask();
    double sum = 0.0;
    for (std::size_t i : mask) sum += 0.5 * (1.0 - old_normals[i].dot(new_normals[i]));
    return sum / static_cast<double>(mask.size());
}

}  // namespace diwr
