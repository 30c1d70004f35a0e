#include "doctest.h"

#include <cmath>

#include "ergolab/catalog.hpp"
#include "ergolab/control.hpp"
#include "ergolab/rng.hpp"
#include "support.hpp"

using namespace ergolab;
using ergolab::testing::ou_model;

namespace {

ControlSpec two_point() {
    ControlSpec c;
    c.name = "two_point";
    c.finite_set = {{-1.0}, {1.0}};
    c.R = [](std::span<const double> u, std::span<double> o) { o[0] = u[0]; };
    c.L = [](std::span<const double>, std::span<const double>) { return 0.0; };
    c.M_R = 1.0;
    return c;
}

ControlSpec quadratic_box(double lo = -2.0, double hi = 2.0) {
    ControlSpec c;
    c.name = "quadratic_box";
    c.box_lo = {lo};
    c.box_hi = {hi};
    c.R = [](std::span<const double> u, std::span<double> o) { o[0] = u[0]; };
    c.L = [](std::span<const double>, std::span<const double> u) { return u[0] * u[0]; };
    c.M_R = 2.0;
    c.M_L = 4.0;
    return c;
}

CostConfig cost_config(double T, std::size_t n) {
    CostConfig c;
    c.dt = 1e-2;
    c.horizon_T = T;
    c.n_paths = n;
    c.seed = 21;
    c.x0 = {0.0};
    return c;
}

}  // namespace

TEST_CASE("two-point control set: psi = -|z| with ties to the lowest index") {
    const ControlSpec c = two_point();
    for (double z : {-2.0, -0.5, 0.5, 3.0}) {
        const auto m = minimize_hamiltonian(c, Point{0.0}, Point{z});
        CHECK(m.value == doctest::Approx(-std::abs(z)));
        CHECK(m.u[0] == (z > 0 ? -1.0 : 1.0));
    }
    const auto tie = minimize_hamiltonian(c, Point{0.0}, Point{0.0});
    CHECK(tie.value == 0.0);
    CHECK(tie.u[0] == -1.0);
}

TEST_CASE("quadratic cost on a box: psi = -z^2 / 4 inside the unconstrained range") {
    const ControlSpec c = quadratic_box();
    for (double z = -3.5; z <= 3.5; z += 0.25) {
        const auto m = minimize_hamiltonian(c, Point{0.3}, Point{z});
        CHECK(m.value == doctest::Approx(-z * z / 4.0).epsilon(1e-6).scale(1.0));
        CHECK(m.u[0] == doctest::Approx(-z / 2.0).epsilon(1e-3));
    }
    const auto zero = minimize_hamiltonian(c, Point{0.3}, Point{0.0});
    CHECK(std::abs(zero.value) < 1e-12);
    CHECK(std::abs(zero.u[0]) < 1e-6);
    // Constrained: |z| > 4 pushes the minimizer to a face.
    const auto far = minimize_hamiltonian(c, Point{0.0}, Point{6.0});
    CHECK(far.u[0] == doctest::Approx(-2.0));
    CHECK(far.value == doctest::Approx(4.0 - 12.0));
}

TEST_CASE("Hamiltonian dominance and determinism") {
    const ControlSpec c = make_control_preset("cosine_cost", 1);
    const Hamiltonian h = build_hamiltonian(c);
    CHECK(h.driver.M_psi == doctest::Approx(1.5));
    const NormalSource rng(3);
    for (std::size_t i = 0; i < 200; ++i) {
        const Point x{2.0 * rng.normal(i, 0)}, z{2.0 * rng.normal(i, 1)};
        const double psi = h.driver.psi(x, z);
        for (const auto& u : c.finite_set) {
            Point r(1);
            c.R(u, r);
            CHECK(psi <= c.L(x, u) + z[0] * r[0] + 1e-12);
        }
        const Point u = h.policy.gamma(x, z);
        Point r(1);
        c.R(u, r);
        CHECK(psi == doctest::Approx(c.L(x, u) + z[0] * r[0]));
        CHECK(h.driver.psi(x, z) == psi);
    }
}

TEST_CASE("Hamiltonian drivers satisfy the driver checks") {
    for (const auto& name : control_preset_names()) {
        const Hamiltonian h = build_hamiltonian(make_control_preset(name, 1));
        const auto rep = check_driver(h.driver, 1, ball_pair_sampler(1, 8), 2000);
        INFO(name);
        CHECK(rep.pass);
    }
    const auto rep = check_driver(build_hamiltonian(quadratic_box()).driver, 1, ball_pair_sampler(1, 8), 2000);
    CHECK(rep.pass);
}

TEST_CASE("constant running cost gives I = c") {
    const ControlSpec c = make_control_preset("constant_cost", 1, {{"c", 0.7}});
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto est = ergodic_cost(ou_model(), &box, c, constant_policy({0.0}), cost_config(5.0, 50));
    CHECK(est.I == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(est.std_error < 1e-12);
}

TEST_CASE("zero control on a cosine cost reproduces the uncontrolled long-run average") {
    const ControlSpec c = make_control_preset("cosine_cost", 1);
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto est = ergodic_cost(ou_model(), &box, c, constant_policy({0.0}), cost_config(20.0, 400));
    // Stationary law of OU reflected on [-1, 1] is N(0, 1/2) conditioned to the box.
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        const double x = -1.0 + 2.0 * i / 2000.0, w = (i == 0 || i == 2000) ? 0.5 : 1.0;
        num += w * std::cos(x) * std::exp(-x * x);
        den += w * std::exp(-x * x);
    }
    const double exact = num / den;
    CHECK(std::abs(est.I - exact) < 4.0 * est.std_error + 1e-2);
}

TEST_CASE("Girsanov reweighting agrees with direct simulation on a short horizon") {
    const ControlSpec c = make_control_preset("cosine_cost", 1);
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto policy = callable_policy("tilt", [](double, std::span<const double> x, std::span<double> u) {
        u[0] = x[0] > 0.0 ? -0.5 : 0.5;
    });
    CostConfig cfg = cost_config(2.0, 4000);
    cfg.burn_in_fraction = 0.0;
    const auto direct = ergodic_cost(ou_model(), &box, c, policy, cfg);
    const auto gir = girsanov_cost(ou_model(), &box, c, policy, cfg);
    const double se = std::sqrt(direct.std_error * direct.std_error + gir.std_error * gir.std_error);
    INFO("direct " << direct.I << " girsanov " << gir.I << " se " << se);
    CHECK(std::abs(direct.I - gir.I) <= 3.0 * se);
}

TEST_CASE("cost estimates are reproducible and validated") {
    const ControlSpec c = make_control_preset("quadratic_tracking", 1);
    const auto a = ergodic_cost(ou_model(), nullptr, c, constant_policy({0.5}), cost_config(3.0, 40));
    const auto b = ergodic_cost(ou_model(), nullptr, c, constant_policy({0.5}), cost_config(3.0, 40));
    CHECK(a.I == b.I);
    CHECK(a.std_error == b.std_error);
    CostConfig bad = cost_config(3.0, 40);
    bad.burn_in_fraction = 1.0;
    CHECK_THROWS(ergodic_cost(ou_model(), nullptr, c, constant_policy({0.5}), bad));
    bad = cost_config(3.0, 0);
    CHECK_THROWS(ergodic_cost(ou_model(), nullptr, c, constant_policy({0.5}), bad));
}
