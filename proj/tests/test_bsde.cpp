#include "doctest.h"

#include <cmath>

#include "ergolab/bsde.hpp"
#include "ergolab/convex_domain.hpp"
#include "ergolab/pde_oracle.hpp"
#include "ergolab/rng.hpp"
#include "support.hpp"

using namespace ergolab;
using ergolab::testing::constant_driver;
using ergolab::testing::cosine_driver;
using ergolab::testing::ou_model;

namespace {

BsdeConfig config(double dt = 1e-2, std::size_t N = 2000, int degree = 6) {
    BsdeConfig c;
    c.dt = dt;
    c.cloud_size = N;
    c.degree = degree;
    c.seed = 5;
    return c;
}

/// Frozen dynamics (f = 0, sigma = 0) on a cloud spread uniformly over [-1, 1].
RegressionCloud frozen_cloud(std::size_t N, double dt) {
    RegressionCloud c;
    c.dim = 1;
    c.dt = dt;
    const NormalSource u(17);
    c.states.resize(N);
    for (std::size_t i = 0; i < N; ++i) c.states[i] = 2.0 * u.normal(i, 0) / 6.0;  // rescaled below
    double m = 0.0;
    for (double v : c.states) m = std::max(m, std::abs(v));
    for (double& v : c.states) v /= m;
    c.next_states = c.states;
    c.increments.assign(N, 0.0);
    c.sigma.assign(N, 0.0);
    c.lo = {-1.0};
    c.hi = {1.0};
    return c;
}

}  // namespace

TEST_CASE("constant driver: v = c / alpha and Z = 0") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    for (double alpha : {0.5, 0.1, 0.01}) {
        const auto sol = solve_discounted(ou_model(), &box, constant_driver(0.7), alpha, config());
        for (double x = -1.0; x <= 1.0; x += 0.1) {
            CHECK(std::abs(evaluate_value(sol, Point{x}).value - 0.7 / alpha) <= 1e-3 * 0.7 / alpha);
            CHECK(std::abs(evaluate_z(sol, Point{x}).z[0]) <= 1e-9);
        }
        CHECK(sol.lambda_alpha == doctest::Approx(0.7).epsilon(1e-9));
    }
}

TEST_CASE("manufactured solution under frozen dynamics") {
    // alpha v = psi when the state does not move, so psi = c + alpha g gives v = g + c / alpha.
    const double c = 0.3, alpha = 0.2;
    const auto g = [](double x) { return 0.5 * x * x * x - 0.25 * x + 0.1; };
    DriverSpec d;
    d.psi = [&](std::span<const double> x, std::span<const double>) { return c + alpha * g(x[0]); };
    d.M_psi = c + alpha * 1.0;
    d.depends_on_z = false;
    ModelSpec m = ou_model(1.0, 0.0);
    m.dissipative_drift = [](std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    const RegressionCloud cloud = frozen_cloud(500, 1e-2);
    const Basis basis(Basis::Family::legendre, 1, 4, {0.0}, {1.0});
    const auto sol = solve_discounted(m, nullptr, d, alpha, config(), cloud, basis);
    for (double x = -1.0; x <= 1.0; x += 0.125)
        CHECK(evaluate_value(sol, Point{x}).value == doctest::Approx(g(x) + c / alpha).epsilon(1e-3));
}

TEST_CASE("manufactured quadratic value under OU dynamics: value and Z") {
    // v = x^2 / 4 solves alpha v - L v = psi with L v = v'' / 2 - x v'.
    const double alpha = 0.5;
    DriverSpec d;
    d.psi = [alpha](std::span<const double> x, std::span<const double>) {
        return alpha * 0.25 * x[0] * x[0] - 0.25 + 0.5 * x[0] * x[0];
    };
    d.M_psi = 10.0;
    d.depends_on_z = false;
    BsdeConfig cfg = config(2e-3, 4000, 4);
    const auto sol = solve_discounted(ou_model(), nullptr, d, alpha, cfg);
    for (double x = -1.0; x <= 1.0; x += 0.25) {
        INFO("x = " << x);
        CHECK(std::abs(evaluate_value(sol, Point{x}).value - 0.25 * x * x) < 2e-2);
        CHECK(std::abs(evaluate_z(sol, Point{x}).z[0] - 0.5 * x) < 2e-2);
        const double h = 1e-4;
        const double fd = (evaluate_value(sol, Point{x + h}).value - evaluate_value(sol, Point{x - h}).value) / (2 * h);
        CHECK(evaluate_z(sol, Point{x}).z[0] == doctest::Approx(fd).epsilon(1e-6));
        CHECK_FALSE(evaluate_value(sol, Point{x}).extrapolated);
    }
    CHECK(evaluate_value(sol, Point{50.0}).extrapolated);
}

TEST_CASE("reflected OU with a cosine driver matches the discounted PDE oracle") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const double alpha = 0.5;
    const auto sol = solve_discounted(ou_model(), &box, cosine_driver(), alpha, config(1e-3, 4000, 6));
    const auto prob = grid_problem_from_model(ou_model(), cosine_driver(), -1.0, 1.0, 400, PdeMode::discounted, alpha);
    const auto pde = solve_discounted_pde(prob);
    double worst = 0.0;
    for (std::size_t i = 0; i < pde.x.size(); i += 10)
        worst = std::max(worst, std::abs(evaluate_value(sol, Point{pde.x[i]}).value - pde.v[i]));
    INFO("sup error " << worst);
    CHECK(worst <= 1e-2);
}

TEST_CASE("discounted bounds hold on the cloud and on a grid") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    DriverSpec d;
    d.psi = [](std::span<const double> x, std::span<const double> z) { return std::cos(3.0 * x[0]) - 0.5 * std::abs(z[0]); };
    d.M_psi = 1.0;
    for (double alpha : {0.2, 0.05}) {
        const auto sol = solve_discounted(ou_model(), &box, d, alpha, config());
        const double bound = d.M_psi / alpha;
        CHECK(sol.diagnostics.max_abs_value_on_cloud <= bound * (1.0 + 1e-9));
        for (double x = -1.0; x <= 1.0; x += 0.05) CHECK(std::abs(evaluate_value(sol, Point{x}).value) <= bound * (1.0 + 1e-9));
        CHECK(std::abs(sol.lambda_alpha) <= d.M_psi);
        CHECK(sol.diagnostics.transition_spectral_bound < 1.0);
        CHECK(sol.diagnostics.truncation_bound <= 1e-4 * bound * (1.0 + 1e-6));
    }
}

TEST_CASE("Z-field on a compact set is stable across discount factors") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    BsdeConfig cfg = config();
    const RegressionCloud cloud = build_cloud(ou_model(), &box, cfg);
    const Basis basis = make_basis(cfg, &box, cloud);
    std::vector<double> sups;
    for (double alpha : {0.1, 0.05, 0.02, 0.01}) {
        const auto sol = solve_discounted(ou_model(), &box, cosine_driver(), alpha, cfg, cloud, basis);
        double s = 0.0;
        for (double x = -1.0; x <= 1.0; x += 0.05) s = std::max(s, std::abs(evaluate_z(sol, Point{x}).z[0]));
        sups.push_back(s);
    }
    for (double s : sups) {
        CHECK(s <= 2.0 * sups.front());
        CHECK(s >= 0.5 * sups.front());
    }
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(solve_discounted(ou_model(), nullptr, constant_driver(1.0), 0.0, config()), std::invalid_argument);
    CHECK_THROWS_AS(solve_discounted(ou_model(), nullptr, constant_driver(1.0), -1.0, config()), std::invalid_argument);
    RegressionCloud flat = frozen_cloud(100, 1e-2);
    std::fill(flat.states.begin(), flat.states.end(), 0.25);
    flat.next_states = flat.states;
    const Basis basis(Basis::Family::legendre, 1, 3, {0.0}, {1.0});
    CHECK_THROWS_WITH_AS(solve_discounted(ou_model(), nullptr, constant_driver(1.0), 0.1, config(), flat, basis),
                         doctest::Contains("rank-deficient design matrix for basis legendre(dim=1,degree=3,size=4) at time slice"),
                         NumericalError);
    const ConvexDomain ball = make_ball({0.0}, 1.0);
    BsdeConfig cos_cfg = config();
    cos_cfg.basis = "cosine";
    CHECK_THROWS(solve_discounted(ou_model(), &ball, constant_driver(1.0), 0.1, cos_cfg));
}

TEST_CASE("reference point") {
    CHECK(reference_point(nullptr, 2) == Point{0.0, 0.0});
    const ConvexDomain shifted = make_box({1.0, 1.0}, {3.0, 2.0});
    CHECK(reference_point(&shifted, 2) == shifted.anchor_c());
}
