#include "diwr/config.hpp"

#include <fstream>
#include <sstream>

#include "diwr/core.hpp"
#include "json.hpp"

namespace diwr {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
    throw ParseError(origin, 0, what);
}

double expect_number(const json& j, const std::string& origin, const std::string& key) {
    if (!j.is_number()) fail(origin, "expected a number for '" + key + "'");
    return j.get<double>();
}

int expect_int(const json& j, const std::string& origin, const std::string& key) {
    if (!j.is_number_integer()) fail(origin, "expected an integer for '" + key + "'");
    return j.get<int>();
}

Severity expect_severity(const json& j, const std::string& origin) {
    if (!j.is_string()) fail(origin, "expected a string for 'severity'");
    const std::string s = j.get<std::string>();
    if (s == "auto") return Severity::Auto;
    if (s == "easy") return Severity::Easy;
    if (s == "severe") return Severity::Severe;
    fail(origin, "severity must be one of auto/easy/severe, got '" + s + "'");
}

void apply_rmsprop(const json& obj, const std::string& origin, RmsPropConfig& out) {
    if (!obj.is_object()) fail(origin, "'rmsprop' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (key == "learning_rate_a") out.learning_rate_a = expect_number(value, origin, key);
        else if (key == "learning_rate_c") out.learning_rate_c = expect_number(value, origin, key);
        else if (key == "decay") out.decay = expect_number(value, origin, key);
        else if (key == "epsilon") out.epsilon = expect_number(value, origin, key);
        else fail(origin, "unknown key 'rmsprop." + key + "'");
    }
}

void apply_orientation(const json& obj, const std::string& origin, OrientationUpdateConfig& out) {
    if (!obj.is_object()) fail(origin, "'orientation' must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (key == "inner_iters") out.inner_iters = expect_int(value, origin, key);
        else if (key == "blend") out.blend = expect_number(value, origin, key);
        else if (key == "change_tolerance") out.change_tolerance = expect_number(value, origin, key);
        else fail(origin, "unknown key 'orientation." + key + "'");
    }
}

}  // namespace

OptimConfig parse_optim_config(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin, 0, e.what());
    }
    if (!root.is_object()) fail(origin, "config root must be a JSON object");

    OptimConfig cfg;
    for (const auto& [key, value] : root.items()) {
        if (key == "lambda1") cfg.lambda1 = expect_number(value, origin, key);
        else if (key == "lambda2") cfg.lambda2 = expect_number(value, origin, key);
        else if (key == "lambda3") cfg.lambda3 = expect_number(value, origin, key);
        else if (key == "lambda4") cfg.lambda4 = expect_number(value, origin, key);
        else if (key == "lambda5") cfg.lambda5 = expect_number(value, origin, key);
        else if (key == "eps_a") cfg.eps_a = expect_number(value, origin, key);
        else if (key == "eps_n") cfg.eps_n = expect_number(value, origin, key);
        else if (key == "t_max") cfg.t_max = expect_int(value, origin, key);
        else if (key == "tau_in") cfg.tau_in = expect_number(value, origin, key);
        else if (key == "r_s") cfg.r_s = expect_number(value, origin, key);
        else if (key == "r_rho") cfg.r_rho = expect_number(value, origin, key);
        else if (key == "grid_resolution") cfg.grid_resolution = expect_int(value, origin, key);
        else if (key == "box_margin") cfg.box_margin = expect_number(value, origin, key);
        else if (key == "beta") cfg.beta = expect_number(value, origin, key);
        else if (key == "rmsprop") apply_rmsprop(value, origin, cfg.rmsprop);
        else if (key == "orientation") apply_orientation(value, origin, cfg.orientation);
        else if (key == "schedule_growth") cfg.schedule_growth = expect_number(value, origin, key);
        else if (key == "schedule_cap") cfg.schedule_cap = expect_number(value, origin, key);
        else if (key == "max_inner_steps_a") cfg.max_inner_steps_a = expect_int(value, origin, key);
        else if (key == "max_inner_steps_c") cfg.max_inner_steps_c = expect_int(value, origin, key);
        else if (key == "max_inner_alternations")
            cfg.max_inner_alternations = expect_int(value, origin, key);
        else if (key == "early_exit_rel") cfg.early_exit_rel = expect_number(value, origin, key);
        else if (key == "early_exit_window")
            cfg.early_exit_window = expect_int(value, origin, key);
        else if (key == "severity") cfg.severity = expect_severity(value, origin);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(value.get<std::int64_t>());
        else fail(origin, "unknown config key '" + key + "'");
    }

    if (cfg.t_max < 1) fail(origin, "t_max must be >= 1");
    if (cfg.tau_in <= 0.0 || cfg.tau_in > 1.0) fail(origin, "tau_in must lie in (0, 1]");
    if (cfg.r_s <= 0.0) fail(origin, "r_s must be positive");
    if (cfg.grid_resolution < 2) fail(origin, "grid_resolution must be >= 2");
    return cfg;
}

OptimConfig load_optim_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_optim_config(buf.str(), path);
}

}  // namespace diwr
