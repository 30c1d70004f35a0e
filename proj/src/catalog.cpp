#include "ergolab/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ergolab {

namespace {

double get(const ParamMap& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

void reject_unknown(const ParamMap& p, const std::vector<std::string>& known, const std::string& preset) {
    for (const auto& [k, v] : p)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("unknown parameter '" + k + "' for preset '" + preset + "'");
}

std::size_t get_dim(const ParamMap& p) {
    const double d = get(p, "dim", 1.0);
    if (!(d >= 1.0) || d != std::floor(d) || d > 64.0) throw ConfigError("dim must be an integer in [1, 64]");
    return static_cast<std::size_t>(d);
}

MatrixField scalar_diffusion(double s) {
    return [s](std::span<const double> x, std::span<double> out) {
        const std::size_t d = x.size();
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < d; ++i) out[i * d + i] = s;
    };
}

}  // namespace

std::vector<std::string> model_preset_names() { return {"linear_ou", "cubic", "paper_sigma"}; }
std::vector<std::string> domain_preset_names() { return {"none", "whole_space", "half_space", "ball", "box"}; }
std::vector<std::string> driver_preset_names() { return {"constant", "cosine", "cos_abs_z", "hamiltonian"}; }
std::vector<std::string> control_preset_names() { return {"quadratic_tracking", "cosine_cost", "constant_cost"}; }

ModelSpec make_model_preset(const std::string& name, const ParamMap& params) {
    ModelSpec m;
    m.name = name;
    if (name == "linear_ou") {
        reject_unknown(params, {"theta", "sigma", "dim"}, name);
        const double theta = get(params, "theta", 1.0), s = get(params, "sigma", 1.0);
        if (!(theta > 0.0) || !(s > 0.0)) throw ConfigError("linear_ou: theta and sigma must be > 0");
        m.dim = get_dim(params);
        m.dissipative_drift = [theta](std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = -theta * x[i];
        };
        m.bounded_drift = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
        m.diffusion = scalar_diffusion(s);
        m.eta = theta;
        m.sigma_bound = std::max(s, 1.0 / s);
        m.poly_growth_nu = 1.0;
    } else if (name == "cubic") {
        reject_unknown(params, {"theta", "amp", "phase", "sigma", "dim"}, name);
        const double theta = get(params, "theta", 1.0), amp = get(params, "amp", 2.0);
        const double phase = get(params, "phase", 0.0), s = get(params, "sigma", 1.0);
        if (!(theta > 0.0) || !(s > 0.0)) throw ConfigError("cubic: theta and sigma must be > 0");
        m.dim = get_dim(params);
        m.dissipative_drift = [theta](std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i] * x[i] * x[i] - theta * x[i];
        };
        m.bounded_drift = [amp, phase](std::span<const double> x, std::span<double> out) {
            for (std::size_t i = 0; i < x.size(); ++i) out[i] = amp * std::cos(x[i] - phase);
        };
        m.diffusion = scalar_diffusion(s);
        m.eta = theta;
        m.b_bound = std::abs(amp) * std::sqrt(static_cast<double>(m.dim));
        m.sigma_bound = std::max(s, 1.0 / s);
        m.poly_growth_nu = 3.0;
    } else if (name == "paper_sigma") {
        reject_unknown(params, {}, name);
        m.dim = 1;
        m.dissipative_drift = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
        m.bounded_drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
        m.diffusion = [](std::span<const double> x, std::span<double> out) {
            const double v = x[0];
            out[0] = v <= 0.0 ? 10.0 : (v < 1.0 ? 10.0 + v / 10.0 : 10.1);
        };
        m.eta = 1.0;
        m.sigma_bound = 10.1;
        m.Lambda = 0.1;
        m.hyp_lambda = 1.0;
    } else {
        throw ConfigError("unknown model preset '" + name + "'");
    }
    m.validate();
    return m;
}

ConvexDomain make_domain_preset(const std::string& name, std::size_t dim, const ParamMap& params) {
    if (name == "none" || name == "whole_space") {
        reject_unknown(params, {}, name);
        return make_whole_space(dim);
    }
    try {
        if (name == "half_space") {
            reject_unknown(params, {"offset"}, name);
            Point normal(dim, 0.0);
            normal[0] = 1.0;
            return make_half_space(normal, get(params, "offset", 0.0));
        }
        if (name == "ball") {
            reject_unknown(params, {"radius"}, name);
            return make_ball(Point(dim, 0.0), get(params, "radius", 1.0));
        }
        if (name == "box") {
            reject_unknown(params, {"lo", "hi"}, name);
            return make_box(Point(dim, get(params, "lo", -1.0)), Point(dim, get(params, "hi", 1.0)));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("domain preset '") + name + "': " + e.what());
    }
    throw ConfigError("unknown domain preset '" + name + "'");
}

DriverSpec make_driver_preset(const std::string& name, const ParamMap& params) {
    DriverSpec d;
    d.name = name;
    if (name == "constant") {
        reject_unknown(params, {"c"}, name);
        const double c = get(params, "c", 0.5);
        d.psi = [c](std::span<const double>, std::span<const double>) { return c; };
        d.M_psi = std::abs(c);
        d.depends_on_z = false;
    } else if (name == "cosine") {
        reject_unknown(params, {"amp", "shift"}, name);
        const double amp = get(params, "amp", 1.0), shift = get(params, "shift", 0.0);
        d.psi = [amp, shift](std::span<const double> x, std::span<const double>) { return amp * std::cos(x[0]) + shift; };
        d.M_psi = std::abs(amp) + std::abs(shift);
        d.depends_on_z = false;
    } else if (name == "cos_abs_z") {
        reject_unknown(params, {"k"}, name);
        const double k = get(params, "k", 0.3);
        if (k < 0.0) throw ConfigError("cos_abs_z: k must be >= 0");
        d.psi = [k](std::span<const double> x, std::span<const double> z) {
            return std::cos(x[0]) - k * std::sqrt(norm2(z));
        };
        d.M_psi = std::max(1.0, k);
    } else {
        throw ConfigError("unknown driver preset '" + name + "'");
    }
    return d;
}

ControlSpec make_control_preset(const std::string& name, std::size_t state_dim, const ParamMap& params) {
    ControlSpec c;
    c.name = name;
    c.state_dim = state_dim;
    c.control_dim = 1;
    auto grid_controls = [&](double n_raw) {
        if (!(n_raw >= 1.0) || n_raw != std::floor(n_raw)) throw ConfigError(name + ": n_controls must be a positive integer");
        const auto n = static_cast<std::size_t>(n_raw);
        for (std::size_t i = 0; i < n; ++i)
            c.finite_set.push_back({n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1)});
    };
    auto unit_push = [](std::span<const double> u, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[0] = u[0];
    };
    if (name == "quadratic_tracking") {
        reject_unknown(params, {"target", "cap", "n_controls"}, name);
        const double target = get(params, "target", 0.5), cap = get(params, "cap", 4.0);
        if (!(cap > 0.0)) throw ConfigError("quadratic_tracking: cap must be > 0");
        grid_controls(get(params, "n_controls", 9.0));
        c.R = unit_push;
        c.L = [target, cap](std::span<const double> x, std::span<const double> u) {
            return std::min((x[0] - target) * (x[0] - target), cap) + 0.5 * u[0] * u[0];
        };
        c.M_R = 1.0;
        c.M_L = cap + 0.5;
    } else if (name == "cosine_cost") {
        reject_unknown(params, {"n_controls"}, name);
        grid_controls(get(params, "n_controls", 9.0));
        c.R = unit_push;
        c.L = [](std::span<const double> x, std::span<const double> u) { return std::cos(x[0]) + 0.5 * u[0] * u[0]; };
        c.M_R = 1.0;
        c.M_L = 1.5;
    } else if (name == "constant_cost") {
        reject_unknown(params, {"c"}, name);
        const double v = get(params, "c", 0.5);
        c.finite_set = {{0.0}};
        c.R = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
        c.L = [v](std::span<const double>, std::span<const double>) { return v; };
        c.M_R = 0.0;
        c.M_L = std::abs(v);
    } else {
        throw ConfigError("unknown control preset '" + name + "'");
    }
    return c;
}

}  // namespace ergolab
