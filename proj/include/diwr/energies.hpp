#pragma once

#include <vector>

#include "diwr/core.hpp"
#include "diwr/energy_grid.hpp"
#include "diwr/point_cloud.hpp"
#include "diwr/winding.hpp"

namespace diwr {

// Snapshot of (a, c) at the start of an optimization stage. The area term
// penalizes drift of the effective sum away from this snapshot.
struct StageBaseline {
    std::vector<double> a_baseline;
    std::vector<double> c_baseline;
    double effective_sum = 0.0;  // sum of a_i^b c_i^b

    static StageBaseline capture(const PointCloud& cloud);
};

// The four energy terms plus the lambda-weighted total of whichever
// subproblem produced the breakdown.
struct EnergyBreakdown {
    double e_diri = 0.0;
    double e_surf = 0.0;
    double e_area = 0.0;
    double e_conf = 0.0;
    double total = 0.0;
};

// Field smoothness: sum over grid samples of delta_q * V_c * |grad w(q)|^2.
double dirichlet_energy(const EnergyGrid& grid, const WindingEvaluator& eval);

// Mean squared deviation of the self-excluded field value from 1/2 over the
// trusted index set. Throws EmptyHighConfidenceSet when the set is empty.
double surface_energy(const PointCloud& cloud, const WindingEvaluator& eval,
                      const std::vector<std::size_t>& trusted);

// |sum a_i c_i - baseline effective sum|.
double area_energy(const PointCloud& cloud, const StageBaseline& baseline);

// sum c_i (1 - c_i); zero exactly when every c is 0 or 1.
double conf_energy(const PointCloud& cloud);

// total = e_diri + l1 * e_surf + l2 * e_area (area subproblem)
EnergyBreakdown objective_area(const PointCloud& cloud, const EnergyGrid& grid,
                               const WindingEvaluator& eval, const StageBaseline& baseline,
                               const std::vector<std::size_t>& trusted, double l1, double l2);

// total = e_diri + l3 * e_surf + l4 * e_area + l5 * e_conf (confidence subproblem)
EnergyBreakdown objective_conf(const PointCloud& cloud, const EnergyGrid& grid,
                               const WindingEvaluator& eval, const StageBaseline& baseline,
                               const std::vector<std::size_t>& trusted, double l3, double l4,
                               double l5);

// Reusable trees for the adjoint gradient passes: one over the grid sample
// positions (carries the forward-pass field vectors as moments) and one over
// the cloud positions (carries the surface-term residuals as scalar
// moments). Structures are built once; moments are refreshed on every
// gradient call. Both traversals honor the evaluator's beta, so beta = 0
// reproduces exact summation.
class AdjointWorkspace {
public:
    AdjointWorkspace(const PointCloud& cloud, const EnergyGrid& grid);

    DipoleTree& grid_tree() { return grid_tree_; }
    DipoleTree& cloud_tree() { return cloud_tree_; }

private:
    DipoleTree grid_tree_;
    DipoleTree cloud_tree_;
};

// Analytic d(total)/d(a_i) of the area subproblem. The optional breakdown
// receives the forward values computed along the way.
std::vector<double> grad_area(const PointCloud& cloud, const EnergyGrid& grid,
                              const WindingEvaluator& eval, AdjointWorkspace& ws,
                              const StageBaseline& baseline,
                              const std::vector<std::size_t>& trusted, double l1, double l2,
                              EnergyBreakdown* forward = nullptr);

// Analytic d(total)/d(c_i) of the confidence subproblem.
std::vector<double> grad_conf(const PointCloud& cloud, const EnergyGrid& grid,
                              const WindingEvaluator& eval, AdjointWorkspace& ws,
                              const StageBaseline& baseline,
                              const std::vector<std::size_t>& trusted, double l3, double l4,
                              double l5, EnergyBreakdown* forward = nullptr);

}  // namespace diwr
