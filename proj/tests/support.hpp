#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ergolab/model.hpp"

namespace ergolab::testing {

/// dV = -theta V dt + s dW in R^dim.
inline ModelSpec ou_model(double theta = 1.0, double s = 1.0, std::size_t dim = 1) {
    ModelSpec m;
    m.name = "ou";
    m.dim = dim;
    m.dissipative_drift = [theta](std::span<const double> x, std::span<double> o) {
        for (std::size_t i = 0; i < x.size(); ++i) o[i] = -theta * x[i];
    };
    m.bounded_drift = [](std::span<const double>, std::span<double> o) {
        for (double& v : o) v = 0.0;
    };
    m.diffusion = [s](std::span<const double> x, std::span<double> o) {
        const std::size_t d = x.size();
        for (std::size_t i = 0; i < d * d; ++i) o[i] = 0.0;
        for (std::size_t i = 0; i < d; ++i) o[i * d + i] = s;
    };
    m.eta = theta > 0.0 ? theta : 1.0;
    m.sigma_bound = std::max(s, s > 0.0 ? 1.0 / s : 1.0);
    return m;
}

/// Reflected Brownian motion generator: d = b = 0 (eta is irrelevant on a bounded domain).
inline ModelSpec brownian_model() {
    ModelSpec m = ou_model(0.0, 1.0, 1);
    m.name = "bm";
    m.dissipative_drift = [](std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    return m;
}

inline DriverSpec constant_driver(double c) {
    DriverSpec d;
    d.name = "constant";
    d.psi = [c](std::span<const double>, std::span<const double>) { return c; };
    d.M_psi = std::abs(c);
    d.depends_on_z = false;
    return d;
}

inline DriverSpec cosine_driver(double shift = 0.0) {
    DriverSpec d;
    d.name = "cosine";
    d.psi = [shift](std::span<const double> x, std::span<const double>) { return std::cos(x[0]) + shift; };
    d.M_psi = 1.0 + std::abs(shift);
    d.depends_on_z = false;
    return d;
}

/// E phi(mean + sd N) by composite Simpson over +-10 standard deviations.
template <class F>
double gaussian_expectation(F phi, double mean, double sd, int n = 4000) {
    const double a = -10.0, b = 10.0, h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = a + h * i;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * phi(mean + sd * u) * std::exp(-0.5 * u * u);
    }
    return s * h / 3.0 / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace ergolab::testing
