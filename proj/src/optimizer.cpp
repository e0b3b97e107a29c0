#include "diwr/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "diwr/confidence.hpp"
#include "diwr/orientation.hpp"
#include "diwr/pcio.hpp"
#include "json.hpp"

namespace diwr {

namespace {

double median_of(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// every index when nothing clears the trust threshold, so surface anchoring
// and the normal-change measure degrade gracefully instead of throwing
std::vector<std::size_t> trusted_or_all(const PointCloud& cloud, double tau_in) {
    std::vector<std::size_t> trusted = cloud.high_confidence_indices(tau_in);
    if (!trusted.empty()) return trusted;
    trusted.resize(cloud.size());
    for (std::size_t i = 0; i < trusted.size(); ++i) trusted[i] = i;
    return trusted;
}

// RMSProp normalizes the gradient magnitude away, so the step size is the
// learning rate itself; areas live on the scale of surface-area / n and the
// rate has to follow them
double area_learning_rate(const RmsPropConfig& rmsprop, const std::vector<double>& baseline) {
    std::vector<double> nonzero;
    nonzero.reserve(baseline.size());
    for (double a : baseline)
        if (a > 0.0) nonzero.push_back(a);
    const double scale = nonzero.empty() ? 1.0 : median_of(nonzero);
    return rmsprop.learning_rate_a * scale;
}

bool all_zero(const std::vector<double>& values) {
    for (double v : values)
        if (v != 0.0) return false;
    return true;
}

void validate_config(const OptimConfig& cfg) {
    if (!(cfg.eps_a > 0.0) || !(cfg.eps_n > 0.0)) throw Error("convergence thresholds must be positive");
    if (cfg.t_max < 1) throw Error("outer iteration cap must be at least 1");
    if (!(cfg.tau_in > 0.0 && cfg.tau_in <= 1.0)) throw Error("trust threshold must lie in (0, 1]");
    if (!(cfg.r_s > 0.0) || !(cfg.r_rho > 0.0)) throw Error("band radii must be positive");
    if (cfg.grid_resolution < 8) throw Error("grid resolution must be at least 8");
    if (!(cfg.beta >= 0.0)) throw Error("far-field beta must be non-negative");
    if (!(cfg.rmsprop.learning_rate_a > 0.0) || !(cfg.rmsprop.learning_rate_c > 0.0))
        throw Error("learning rates must be positive");
    if (!(cfg.rmsprop.decay > 0.0 && cfg.rmsprop.decay < 1.0))
        throw Error("moment decay must lie in (0, 1)");
    if (!(cfg.rmsprop.epsilon >= 0.0)) throw Error("rmsprop epsilon must be non-negative");
    if (!(cfg.schedule_growth >= 1.0) || !(cfg.schedule_cap >= 1.0))
        throw Error("lambda schedule must not shrink");
    if (cfg.max_inner_steps_a < 0 || cfg.max_inner_steps_c < 0 || cfg.max_inner_alternations < 1)
        throw Error("step budgets must be non-negative and alternations at least 1");
    if (!(cfg.early_exit_rel >= 0.0) || cfg.early_exit_window < 1)
        throw Error("early exit rule is malformed");
}

struct Lambdas {
    double l1, l2, l3, l4, l5;
};

Lambdas initial_lambdas(const PointCloud& cloud, const OptimConfig& cfg) {
    Lambdas l{cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.lambda4, cfg.lambda5};
    bool severe = cfg.severity == Severity::Severe;
    if (cfg.severity == Severity::Auto)
        severe = severe_regime(quality_measures(cloud));
    if (severe) {
        l.l1 *= 0.5;
        l.l2 *= 0.5;
        l.l3 *= 0.5;
        l.l4 *= 0.5;
        l.l5 *= 0.5;
    }
    return l;
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}

    double elapsed_ms() const {
        const auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(now - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::string record_json(const StageRecord& record) {
    nlohmann::json j;
    j["t"] = record.t;
    j["stage"] = record.stage;
    j["e_diri"] = record.e_diri;
    j["e_surf"] = record.e_surf;
    j["e_area"] = record.e_area;
    j["e_conf"] = record.e_conf;
    j["delta_a"] = record.delta_a;
    j["delta_n"] = record.delta_n;
    j["wallclock_ms"] = record.wallclock_ms;
    return j.dump();
}

std::string log_jsonl(const std::vector<StageRecord>& records) {
    std::string out;
    for (const StageRecord& record : records) {
        out += record_json(record);
        out += '\n';
    }
    return out;
}

void rmsprop_step(std::vector<double>& values, const std::vector<double>& grads,
                  std::vector<double>& moments, double lr, double decay, double eps,
                  double lower_bound, double upper_bound) {
    if (values.size() != grads.size()) throw MismatchedSizes(values.size(), grads.size());
    if (values.size() != moments.size()) throw MismatchedSizes(values.size(), moments.size());
    if (!(lr > 0.0)) throw Error("learning rate must be positive");
    if (!(decay > 0.0 && decay < 1.0)) throw Error("moment decay must lie in (0, 1)");
    if (!(eps >= 0.0)) throw Error("rmsprop epsilon must be non-negative");
    if (!(lower_bound <= upper_bound)) throw Error("bound interval is empty");

    parallel_for(values.size(), [&](std::size_t i) {
        const double g = grads[i];
        moments[i] = decay * moments[i] + (1.0 - decay) * g * g;
        const double stepped = values[i] - lr * g / std::sqrt(moments[i] + eps);
        values[i] = std::min(upper_bound, std::max(lower_bound, stepped));
    });
}

double delta_a_measure(const std::vector<double>& areas, const std::vector<double>& baseline) {
    if (areas.size() != baseline.size()) throw MismatchedSizes(areas.size(), baseline.size());
    if (areas.empty()) return 0.0;
    const double sum = parallel_sum(areas.size(), [&](std::size_t i) {
        if (baseline[i] == 0.0) return 0.0;
        return std::abs((areas[i] - baseline[i]) / baseline[i]);
    });
    return sum / static_cast<double>(areas.size());
}

double schedule_multiplier(const OptimConfig& cfg, int t) {
    return std::min(std::pow(cfg.schedule_growth, t - 1), cfg.schedule_cap);
}

bool severe_regime(const QualityReport& report) {
    return report.sigma_hat > 0.002 || report.u_hat > 0.3 || report.o_hat > 0.08;
}

double optimize_area_stage(PointCloud& cloud, const EnergyGrid& grid, WindingEvaluator& eval,
                           AdjointWorkspace& ws, OptimizerState& state, const OptimConfig& cfg,
                           double l1, double l2) {
    const std::size_t n = cloud.size();
    state.baseline = StageBaseline::capture(cloud);
    state.moment_a.assign(n, 0.0);
    const std::vector<std::size_t> trusted = trusted_or_all(cloud, cfg.tau_in);
    const double lr = area_learning_rate(cfg.rmsprop, state.baseline.a_baseline);
    const double inf = std::numeric_limits<double>::infinity();

    double prev_total = 0.0;
    int calm = 0;
    for (int step = 0; step < cfg.max_inner_steps_a; ++step) {
        eval.refresh();
        EnergyBreakdown forward;
        const std::vector<double> grads =
            grad_area(cloud, grid, eval, ws, state.baseline, trusted, l1, l2, &forward);
        if (!std::isfinite(forward.total))
            throw NonFiniteEnergy("area objective at inner step " + std::to_string(step));
        if (all_zero(grads)) break;

        rmsprop_step(cloud.area_weights, grads, state.moment_a, lr, cfg.rmsprop.decay,
                     cfg.rmsprop.epsilon, 0.0, inf);
        cloud.bump();

        if (step > 0) {
            const double rel = std::abs(forward.total - prev_total) /
                               std::max(std::abs(prev_total), 1e-30);
            calm = rel < cfg.early_exit_rel ? calm + 1 : 0;
            if (calm >= cfg.early_exit_window) break;
        }
        prev_total = forward.total;
    }
    eval.refresh();

    const double delta_a = delta_a_measure(cloud.area_weights, state.baseline.a_baseline);
    state.delta_a_history.push_back(delta_a);
    return delta_a;
}

void optimize_conf_stage(PointCloud& cloud, EnergyGrid& grid, WindingEvaluator& eval,
                         AdjointWorkspace& ws, OptimizerState& state, const OptimConfig& cfg,
                         double l3, double l4, double l5) {
    const std::size_t n = cloud.size();
    eval.refresh();
    std::vector<double> winding(n);
    parallel_for(n, [&](std::size_t i) {
        winding[i] = eval.eval(cloud.positions[i], Singular::Skip);
    });

    compute_densities(cloud, cfg.r_rho);
    reset_confidences(cloud, winding);

    // the reset moved the trusted set, so the integration domain changes now
    // and once more after the gradient steps; in between both stay frozen
    grid = build_grid(cloud, cfg);
    ws = AdjointWorkspace(cloud, grid);
    eval.refresh();

    state.baseline = StageBaseline::capture(cloud);
    state.moment_c.assign(n, 0.0);
    const std::vector<std::size_t> trusted = trusted_or_all(cloud, cfg.tau_in);

    double prev_total = 0.0;
    int calm = 0;
    for (int step = 0; step < cfg.max_inner_steps_c; ++step) {
        eval.refresh();
        EnergyBreakdown forward;
        const std::vector<double> grads =
            grad_conf(cloud, grid, eval, ws, state.baseline, trusted, l3, l4, l5, &forward);
        if (!std::isfinite(forward.total))
            throw NonFiniteEnergy("confidence objective at inner step " + std::to_string(step));
        if (all_zero(grads)) break;

        rmsprop_step(cloud.confidences, grads, state.moment_c, cfg.rmsprop.learning_rate_c,
                     cfg.rmsprop.decay, cfg.rmsprop.epsilon, 0.0, 1.0);
        cloud.bump();

        if (step > 0) {
            const double rel = std::abs(forward.total - prev_total) /
                               std::max(std::abs(prev_total), 1e-30);
            calm = rel < cfg.early_exit_rel ? calm + 1 : 0;
            if (calm >= cfg.early_exit_window) break;
        }
        prev_total = forward.total;
    }

    grid = build_grid(cloud, cfg);
    ws = AdjointWorkspace(cloud, grid);
    eval.refresh();
}

OptimizerState run_diwr(PointCloud& cloud, const OptimConfig& cfg, const std::string& log_path,
                        const std::string& checkpoint_dir) {
    validate_config(cfg);
    const std::size_t n = cloud.size();
    if (n < 4) throw TooFewPoints(n);
    if (cloud.normals.size() != n) throw MismatchedSizes(cloud.normals.size(), n);
    if (cloud.area_weights.size() != n) throw MismatchedSizes(cloud.area_weights.size(), n);
    if (cloud.confidences.size() != n) throw MismatchedSizes(cloud.confidences.size(), n);
    bool any_unit = false;
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 16); ++i)
        any_unit = any_unit || cloud.normals[i].norm() > 0.5;
    if (!any_unit)
        throw Error("normals are uninitialized: run the orientation and area initializers first");

    OptimizerState state;
    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw Error("cannot open log file: " + log_path);
    }
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);

    const Lambdas base = initial_lambdas(cloud, cfg);

    EnergyGrid grid = build_grid(cloud, cfg);
    WindingEvaluator eval(cloud, cfg.beta);
    AdjointWorkspace ws(cloud, grid);
    state.baseline = StageBaseline::capture(cloud);

    double delta_a = 0.0;
    double delta_n = 0.0;

    const auto record_stage = [&](int t, const char* stage, double ms) {
        StageRecord record;
        record.t = t;
        record.stage = stage;
        record.e_diri = dirichlet_energy(grid, eval);
        record.e_surf = surface_energy(cloud, eval, trusted_or_all(cloud, cfg.tau_in));
        record.e_area = area_energy(cloud, state.baseline);
        record.e_conf = conf_energy(cloud);
        record.delta_a = delta_a;
        record.delta_n = delta_n;
        record.wallclock_ms = ms;
        if (!std::isfinite(record.e_diri) || !std::isfinite(record.e_surf) ||
            !std::isfinite(record.e_area) || !std::isfinite(record.e_conf))
            throw NonFiniteEnergy("energy breakdown at t=" + std::to_string(t) + " stage=" + stage);
        state.log.push_back(record);
        state.e_diri_final = record.e_diri;
        if (log_file.is_open()) {
            log_file << record_json(record) << '\n';
            log_file.flush();
        }
    };

    try {
        int t = 1;
        bool first_orient = true;
        while (true) {
            const double mult = schedule_multiplier(cfg, t);
            const Lambdas l{base.l1 * mult, base.l2 * mult, base.l3 * mult, base.l4 * mult,
                            base.l5 * mult};
            const std::vector<Vec3> start_normals = cloud.normals;

            int alternation = 0;
            do {
                StageTimer orient_timer;
                update_normals(cloud, eval, cfg.orientation, cfg.r_s);
                record_stage(t, "orient", orient_timer.elapsed_ms());
                if (first_orient) {
                    state.e_diri_initial = state.log.back().e_diri;
                    first_orient = false;
                }

                StageTimer area_timer;
                delta_a = optimize_area_stage(cloud, grid, eval, ws, state, cfg, l.l1, l.l2);
                record_stage(t, "area", area_timer.elapsed_ms());
                ++alternation;
            } while (delta_a > cfg.eps_a && alternation < cfg.max_inner_alternations);

            StageTimer conf_timer;
            optimize_conf_stage(cloud, grid, eval, ws, state, cfg, l.l3, l.l4, l.l5);
            delta_n = normal_change(start_normals, cloud.normals,
                                    trusted_or_all(cloud, cfg.tau_in));
            state.delta_n_history.push_back(delta_n);
            record_stage(t, "conf", conf_timer.elapsed_ms());

            if (!checkpoint_dir.empty()) {
                char name[32];
                std::snprintf(name, sizeof(name), "checkpoint_t%02d.ply", t);
                save_points(cloud, checkpoint_dir + "/" + name);
            }

            state.t = t;
            ++t;
            if (delta_n <= cfg.eps_n || t > cfg.t_max) break;
        }
    } catch (const NonFiniteEnergy& abort) {
        throw NonFiniteEnergy(abort.detail(), log_jsonl(state.log));
    }
    return state;
}

}  // namespace diwr
