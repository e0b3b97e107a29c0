#pragma once

#include <string>
#include <vector>

#include "diwr/config.hpp"
#include "diwr/core.hpp"
#include "diwr/energies.hpp"
#include "diwr/energy_grid.hpp"
#include "diwr/metrics.hpp"
#include "diwr/point_cloud.hpp"
#include "diwr/winding.hpp"

namespace diwr {

// One logged stage of a run: the energy breakdown after the stage finished,
// plus the latest convergence statistics.
struct StageRecord {
    int t = 0;          // outer iteration the stage belongs to
    std::string stage;  // "orient", "area", or "conf"
    double e_diri = 0.0;
    double e_surf = 0.0;
    double e_area = 0.0;
    double e_conf = 0.0;
    double delta_a = 0.0;  // relative area drift of the last area stage
    double delta_n = 0.0;  // high-confidence normal change, once measured
    double wallclock_ms = 0.0;
};

std::string record_json(const StageRecord& record);

// One JSON object per line, in log order.
std::string log_jsonl(const std::vector<StageRecord>& records);

// Mutable bookkeeping of a run. Stages reset their moment accumulator and
// capture a fresh baseline on entry, so the fields always describe the most
// recent stage.
struct OptimizerState {
    int t = 0;  // completed outer iterations
    StageBaseline baseline;
    std::vector<double> moment_a;
    std::vector<double> moment_c;
    std::vector<StageRecord> log;
    std::vector<double> delta_a_history;
    std::vector<double> delta_n_history;
    double e_diri_initial = 0.0;  // after the first normal update
    double e_diri_final = 0.0;    // after the last logged stage
};

// One projected RMSProp update, elementwise over the vectors:
//   m <- decay * m + (1 - decay) * g^2
//   v <- clamp(v - lr * g / sqrt(m + eps), lower_bound, upper_bound)
// Throws MismatchedSizes on length disagreement, Error for lr <= 0, decay
// outside (0, 1), eps < 0, or an empty bound interval.
void rmsprop_step(std::vector<double>& values, const std::vector<double>& grads,
                  std::vector<double>& moments, double lr, double decay, double eps,
                  double lower_bound, double upper_bound);

// Mean relative drift of the areas from their baseline; terms with a zero
// baseline are skipped but the normalizer stays the full length. Throws
// MismatchedSizes.
double delta_a_measure(const std::vector<double>& areas, const std::vector<double>& baseline);

// Lambda growth factor for outer iteration t (1-based): growth^(t-1), capped.
double schedule_multiplier(const OptimConfig& cfg, int t);

// True when any quality measure exceeds the easy/moderate band, which halves
// the initial lambda weights.
bool severe_regime(const QualityReport& report);

// Gradient stage on the area weights: captures a baseline, zeroes the area
// moments, then runs up to cfg.max_inner_steps_a RMSProp steps against the
// lambda-weighted area objective with projection a >= 0, stopping early once
// the relative objective change stays below cfg.early_exit_rel for
// cfg.early_exit_window consecutive steps. The learning rate is scaled by
// the median nonzero baseline area so steps track the natural weight scale.
// Leaves the evaluator refreshed and returns (and records) delta_a.
double optimize_area_stage(PointCloud& cloud, const EnergyGrid& grid, WindingEvaluator& eval,
                           AdjointWorkspace& ws, OptimizerState& state, const OptimConfig& cfg,
                           double l1, double l2);

// Confidence stage: recomputes self-excluded winding values, resets the
// confidences (bi-means split plus density stratification), rebuilds the
// grid and workspace for the changed trusted set, captures the baseline
// after the reset, then runs up to cfg.max_inner_steps_c RMSProp steps on c
// projected to [0, 1]. The grid and workspace are rebuilt again afterward.
void optimize_conf_stage(PointCloud& cloud, EnergyGrid& grid, WindingEvaluator& eval,
                         AdjointWorkspace& ws, OptimizerState& state, const OptimConfig& cfg,
                         double l3, double l4, double l5);

// Staged alternation over the full state: repeats {normal update; area
// stage} until delta_a <= cfg.eps_a (capped at cfg.max_inner_alternations),
// runs the confidence stage, and measures the normal change over the
// trusted points against the iteration's starting normals; outer iterations
// stop once that change reaches cfg.eps_n or cfg.t_max is hit. Lambda
// weights grow by the schedule each outer iteration, starting from the
// config values, halved when the severity regime (fixed or measured) is
// severe.
//
// The cloud must be normalized to the unit cube with normals, areas, and
// confidences initialized. When log_path is nonempty, every stage record is
// appended there as a JSON line as soon as it completes; when
// checkpoint_dir is nonempty, the full point state is saved there as
// checkpoint_tNN.ply after every outer iteration. A non-finite energy
// aborts the run with the log serialized into the exception.
OptimizerState run_diwr(PointCloud& cloud, const OptimConfig& cfg,
                        const std::string& log_path = "",
                        const std::string& checkpoint_dir = "");

}  // namespace diwr
