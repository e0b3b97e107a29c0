#include "diwr/energies.hpp"

#include <cmath>

namespace diwr {

namespace {
inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double effective_area_sum(const PointCloud& cloud) {
    double s = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        s += cloud.area_weights[i] * cloud.confidences[i];
    return s;
}
}  // namespace

StageBaseline StageBaseline::capture(const PointCloud& cloud) {
    StageBaseline b;
    b.a_baseline = cloud.area_weights;
    b.c_baseline = cloud.confidences;
    b.effective_sum = effective_area_sum(cloud);
    return b;
}

double dirichlet_energy(const EnergyGrid& grid, const WindingEvaluator& eval) {
    const double vc = grid.voxel_volume;
    return parallel_sum(grid.size(), [&](std::size_t i) {
        const GridSample& s = grid.samples[i];
        return s.delta * vc * eval.gradient(s.position, Singular::Skip).squaredNorm();
    });
}

double surface_energy(const PointCloud& cloud, const WindingEvaluator& eval,
                      const std::vector<std::size_t>& trusted) {
    if (trusted.empty()) throw EmptyHighConfidenceSet();
    const double sum = parallel_sum(trusted.size(), [&](std::size_t k) {
        const double w = eval.eval(cloud.positions[trusted[k]], Singular::Skip);
        const double r = w - 0.5;
        return r * r;
    });
    return sum / static_cast<double>(trusted.size());
}

double area_energy(const PointCloud& cloud, const StageBaseline& baseline) {
    return std::abs(effective_area_sum(cloud) - baseline.effective_sum);
}

double conf_energy(const PointCloud& cloud) {
    double s = 0.0;
    for (double c : cloud.confidences) s += c * (1.0 - c);
    return s;
}

EnergyBreakdown objective_area(const PointCloud& cloud, const EnergyGrid& grid,
                               const WindingEvaluator& eval, const StageBaseline& baseline,
                               const std::vector<std::size_t>& trusted, double l1, double l2) {
    EnergyBreakdown b;
    b.e_diri = dirichlet_energy(grid, eval);
    b.e_surf = surface_energy(cloud, eval, trusted);
    b.e_area = area_energy(cloud, baseline);
    b.e_conf = conf_energy(cloud);
    b.total = b.e_diri + l1 * b.e_surf + l2 * b.e_area;
    return b;
}

EnergyBreakdown objective_conf(const PointCloud& cloud, const EnergyGrid& grid,
                               const WindingEvaluator& eval, const StageBaseline& baseline,
                               const std::vector<std::size_t>& trusted, double l3, double l4,
                               double l5) {
    EnergyBreakdown b;
    b.e_diri = dirichlet_energy(grid, eval);
    b.e_surf = surface_energy(cloud, eval, trusted);
    b.e_area = area_energy(cloud, baseline);
    b.e_conf = conf_energy(cloud);
    b.total = b.e_diri + l3 * b.e_surf + l4 * b.e_area + l5 * b.e_conf;
    return b;
}

AdjointWorkspace::AdjointWorkspace(const PointCloud& cloud, const EnergyGrid& grid) {
    std::vector<Vec3> grid_positions(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) grid_positions[i] = grid.samples[i].position;
    grid_tree_.build(grid_positions);
    cloud_tree_.build(cloud.positions);
}

namespace {

// Shared gradient pass for both subproblems.
//
// The smoothness term is quadratic in the per-sample field gradients, which
// are linear in each a_i (and c_i) with coefficient c_i (a_i) times the
// dipole-gradient kernel of point i at the sample. Summing over samples
// first gives
//
//   d e_diri / d a_i = c_i * n_i . H(p_i),
//
// where H is the dipole-gradient field sourced at the grid samples with
// vector moments F_q = 2 delta_q V_c grad w(q). The kernel is even in the
// source-to-query offset, so the same tree traversal that evaluates cloud
// fields evaluates H from the grid tree. The surface term contributes
//
//   d e_surf / d a_i = c_i * n_i . M(p_i),
//   M(x) = sum over trusted j of s_j (x - p_j) / (4 pi r^3),
//   s_j = (2/|trusted|) (w_j - 1/2),
//
// which is minus the cloud tree's scalar-moment field with s as moments.
// Point i's own term is excluded from both by the singularity skip. The
// area term adds sign(sum a c - baseline) times the partner coefficient,
// and the confidence subproblem appends the polarization derivative.
struct AdjointFields {
    std::vector<Vec3> field_h;   // grid-sourced adjoint gradient at each point
    std::vector<Vec3> field_m;   // surface-residual field at each point
    double e_diri = 0.0;
    double e_surf = 0.0;
    double area_sign = 0.0;
};

AdjointFields adjoint_fields(const PointCloud& cloud, const EnergyGrid& grid,
                             const WindingEvaluator& eval, AdjointWorkspace& ws,
                             const StageBaseline& baseline,
                             const std::vector<std::size_t>& trusted, double lambda_surf) {
    if (trusted.empty()) throw EmptyHighConfidenceSet();
    const double beta = eval.beta();
    const std::size_t n = cloud.size();
    const std::size_t m = grid.size();
    const double vc = grid.voxel_volume;

    std::vector<Vec3> forward(m);
    AdjointFields out;
    out.e_diri = parallel_sum(m, [&](std::size_t q) {
        const GridSample& s = grid.samples[q];
        const Vec3 g = eval.gradient(s.position, Singular::Skip);
        forward[q] = (2.0 * s.delta * vc) * g;
        return s.delta * vc * g.squaredNorm();
    });
    ws.grid_tree().refresh_vector_moments(forward);

    std::vector<double> residual(n, 0.0);
    const double inv_t = 1.0 / static_cast<double>(trusted.size());
    out.e_surf = inv_t * parallel_sum(trusted.size(), [&](std::size_t k) {
        const std::size_t j = trusted[k];
        const double w = eval.eval(cloud.positions[j], Singular::Skip);
        const double r = w - 0.5;
        residual[j] = lambda_surf * 2.0 * inv_t * r;
        return r * r;
    });
    ws.cloud_tree().refresh_scalar_moments(residual);

    out.area_sign = sign_of(effective_area_sum(cloud) - baseline.effective_sum);

    out.field_h.resize(n);
    out.field_m.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3& p = cloud.positions[i];
        out.field_h[i] = ws.grid_tree().gradient(p, beta, Singular::Skip);
        out.field_m[i] = -ws.cloud_tree().scalar_field(p, beta, Singular::Skip);
    });
    return out;
}

}  // namespace

std::vector<double> grad_area(const PointCloud& cloud, const EnergyGrid& grid,
                              const WindingEvaluator& eval, AdjointWorkspace& ws,
                              const StageBaseline& baseline,
                              const std::vector<std::size_t>& trusted, double l1, double l2,
                              EnergyBreakdown* forward) {
    const AdjointFields f = adjoint_fields(cloud, grid, eval, ws, baseline, trusted, l1);
    const std::size_t n = cloud.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double directional = cloud.normals[i].dot(f.field_h[i] + f.field_m[i]);
        g[i] = cloud.confidences[i] * (directional + l2 * f.area_sign);
    }
    if (forward) {
        forward->e_diri = f.e_diri;
        forward->e_surf = f.e_surf;
        forward->e_area = area_energy(cloud, baseline);
        forward->e_conf = conf_energy(cloud);
        forward->total = f.e_diri + l1 * f.e_surf + l2 * forward->e_area;
    }
    return g;
}

std::vector<double> grad_conf(const PointCloud& cloud, const EnergyGrid& grid,
                              const WindingEvaluator& eval, AdjointWorkspace& ws,
                              const StageBaseline& baseline,
                              const std::vector<std::size_t>& trusted, double l3, double l4,
                              double l5, EnergyBreakdown* forward) {
    const AdjointFields f = adjoint_fields(cloud, grid, eval, ws, baseline, trusted, l3);
    const std::size_t n = cloud.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double directional = cloud.normals[i].dot(f.field_h[i] + f.field_m[i]);
        g[i] = cloud.area_weights[i] * (directional + l4 * f.area_sign) +
               l5 * (1.0 - 2.0 * cloud.confidences[i]);
    }
    if (forward) {
        forward->e_diri = f.e_diri;
        forward->e_surf = f.e_surf;
        forward->e_area = area_energy(cloud, baseline);
        forward->e_conf = conf_energy(cloud);
        forward->total = f.e_diri + l3 * f.e_surf + l4 * forward->e_area + l5 * forward->e_conf;
    }
    return g;
}

}  // namespace diwr
