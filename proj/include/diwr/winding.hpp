#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "diwr/point_cloud.hpp"

namespace diwr {

constexpr double kInv4Pi = 0.25 * std::numbers::inv_pi_v<double>;

// The field induced by weighted point dipoles,
//
//   w(q) = sum_i a_i c_i (p_i - q) . n_i / (4 pi |p_i - q|^3),
//
// its spatial gradient, and its derivatives with respect to the per-point
// state. Queries closer than kSingularRadius to a source either raise
// SingularQuery or skip that source; the skip mode is what self-excluded
// evaluation at a cloud point uses.

constexpr double kSingularRadius = 1e-12;

enum class Singular { Error, Skip };

inline double kernel_value(const Vec3& src, const Vec3& moment, const Vec3& q, double inv_r3) {
    return moment.dot(src - q) * inv_r3 * kInv4Pi;
}

// d/dq of the dipole term, with d = src - q:
//   (1/4pi) * (-m / r^3 + 3 (d.m) d / r^5)
inline Vec3 kernel_gradient(const Vec3& src, const Vec3& moment, const Vec3& q, double inv_r3,
                            double inv_r2) {
    const Vec3 d = src - q;
    return kInv4Pi * inv_r3 * (3.0 * d.dot(moment) * inv_r2 * d - moment);
}

double eval_exact(const PointCloud& cloud, const Vec3& q, Singular policy = Singular::Error);

Vec3 grad_exact(const PointCloud& cloud, const Vec3& q, Singular policy = Singular::Error);

// Derivatives of w(q) with respect to every a_i, c_i and n_i.
struct PartialDerivs {
    std::vector<double> dw_da;  // c_i K_i(q)
    std::vector<double> dw_dc;  // a_i K_i(q)
    std::vector<Vec3> dw_dn;    // a_i c_i (p_i - q) / (4 pi r^3)
};

PartialDerivs partial_derivs(const PointCloud& cloud, const Vec3& q,
                             Singular policy = Singular::Error);

// ---------------------------------------------------------------------------
// Far-field accelerated evaluation.
//
// Median-split tree over a fixed position set. Each node caches the moment
// aggregate, the moment-weighted centroid, a radius bounding every member
// point, and two truncation moments for error control. A node is used in
// aggregate (single dipole) form when radius / distance < 1/beta, measuring
// distance conservatively from the query to the node's bounding sphere, and
// only if its truncation estimate fits a budget shrinking like 1/beta^2.
// beta <= 0 disables the far field entirely, reproducing exact summation.
//
// The tree structure is fixed at build time; moments can be refreshed in
// place when the per-item weights change. Vector moments drive potential()
// and gradient(); an independent scalar moment channel drives
// scalar_field(q) = sum_i s_i (p_i - q) / (4 pi r^3), the adjoint kernel the
// energy gradients need.

class DipoleTree {
public:
    DipoleTree() = default;
    explicit DipoleTree(const std::vector<Vec3>& positions) { build(positions); }

    void build(const std::vector<Vec3>& positions);

    void refresh_vector_moments(const std::vector<Vec3>& moments);
    void refresh_scalar_moments(const std::vector<double>& moments);

    double potential(const Vec3& q, double beta, Singular policy = Singular::Error) const;
    Vec3 gradient(const Vec3& q, double beta, Singular policy = Singular::Error) const;
    Vec3 scalar_field(const Vec3& q, double beta, Singular policy = Singular::Error) const;

    std::size_t size() const { return pos_.size(); }
    bool empty() const { return pos_.empty(); }

private:
    static constexpr int kLeafSize = 24;
    static constexpr int kMaxStack = 64;

    struct Node {
        Vec3 center{0, 0, 0};
        double radius = 0.0;
        Vec3 vec_sum{0, 0, 0};
        double vec_weight = 0.0;     // sum of |m_i|
        Vec3 wpos{0, 0, 0};          // sum of |m_i| p_i
        double wp2 = 0.0;            // sum of |m_i| |p_i|^2
        Eigen::Matrix3d mpT = Eigen::Matrix3d::Zero();  // sum of m_i p_i^T
        double t1 = 0.0;             // |sum m_i (p_i - center)^T|_F
        double t2 = 0.0;             // sum |m_i| |p_i - center|^2
        double scalar_sum = 0.0;
        double scalar_weight = 0.0;  // sum of |s_i|
        Vec3 sp{0, 0, 0};            // sum of s_i p_i
        double sp2 = 0.0;            // sum of |s_i| |p_i|^2
        double s1 = 0.0;             // |sum s_i (p_i - center)|
        double s2 = 0.0;             // sum |s_i| |p_i - center|^2
        int left = -1;
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    int build_node(int begin, int end, const std::vector<Vec3>& points);
    void refresh_geometry();
    void refresh_scalar_node(Node& node);

    std::vector<Node> nodes_;
    std::vector<int> order_;     // tree slot -> original index
    std::vector<Vec3> pos_;      // tree order
    std::vector<Vec3> vecm_;     // tree order
    std::vector<double> scalm_;  // tree order
};

// ---------------------------------------------------------------------------

// Snapshot of a cloud's dipole field for repeated queries. Built over the
// cloud's current (a, c, n); detects mutation through the generation counter
// and raises StaleTree instead of returning values for an outdated state.
class WindingEvaluator {
public:
    explicit WindingEvaluator(const PointCloud& cloud, double beta = 2.0);

    // Re-sync with the cloud after its (a, c, n) changed. Positions must be
    // unchanged: only moments and node geometry are recomputed, the spatial
    // partition is kept.
    void refresh();

    double eval(const Vec3& q, Singular policy = Singular::Error) const;
    Vec3 gradient(const Vec3& q, Singular policy = Singular::Error) const;

    double beta() const { return beta_; }
    const DipoleTree& tree() const { return tree_; }

private:
    void check_fresh() const;

    const PointCloud* cloud_ = nullptr;
    std::uint64_t generation_ = 0;
    double beta_ = 2.0;
    DipoleTree tree_;
};

}  // namespace diwr
