#pragma once

#include <cstdint>
#include <string>

namespace diwr {

// RMSProp hyperparameters. The update for one coordinate is
//   m <- decay * m + (1 - decay) * g^2
//   v <- clamp(v - lr * g / sqrt(m + eps), lower, upper)
struct RmsPropConfig {
    double learning_rate_a = 0.01;
    double learning_rate_c = 0.01;
    double decay = 0.9;
    double epsilon = 1e-8;
};

// Inner loop of the normal update operator.
struct OrientationUpdateConfig {
    int inner_iters = 20;        // sweeps per update call
    double blend = 0.5;          // weight of the field gradient against the old normal
    double change_tolerance = 1e-3;  // mean angular change (radians) that stops early
};

// Input difficulty regime. Auto derives it from the measured quality of the
// cloud; Severe halves the energy weights.
enum class Severity { Auto, Easy, Severe };

struct OptimConfig {
    // objective weights: surface/area for the area stage, surface/area/
    // polarization for the confidence stage
    double lambda1 = 5.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 0.5;
    double lambda5 = 5e-3;

    double eps_a = 0.15;  // area stabilization threshold on delta_a
    double eps_n = 0.02;  // outer stop threshold on the normal change
    int t_max = 10;       // outer iteration cap

    double tau_in = 0.9;  // confidence threshold defining the trusted set
    double r_s = 0.03;    // exclusion band radius around trusted points
    double r_rho = 0.06;  // density counting radius

    int grid_resolution = 64;
    double box_margin = 0.1;  // padding per side around the unit cube
    double beta = 2.0;        // far-field acceptance; 0 forces exact sums

    RmsPropConfig rmsprop;
    OrientationUpdateConfig orientation;

    double schedule_growth = 1.25;  // lambda multiplier per outer iteration
    double schedule_cap = 4.0;      // growth ceiling relative to initial lambdas

    int max_inner_steps_a = 200;
    int max_inner_steps_c = 200;
    int max_inner_alternations = 8;  // normal-update / area-stage repeats per outer iter

    // a stage exits early when the relative objective change stays below
    // early_exit_rel for early_exit_window consecutive steps
    double early_exit_rel = 1e-5;
    int early_exit_window = 10;

    Severity severity = Severity::Auto;
    std::uint64_t seed = 0;
};

// Parse a JSON config file; unknown keys raise ParseError, missing keys keep
// defaults. Structure mirrors the fields above (rmsprop and orientation are
// nested objects).
OptimConfig load_optim_config(const std::string& path);
OptimConfig parse_optim_config(const std::string& text, const std::string& origin);

}  // namespace diwr
