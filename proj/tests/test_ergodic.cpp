#include "doctest.h"

#include <cmath>

#include "ergolab/convex_domain.hpp"
#include "ergolab/ergodic.hpp"
#include "ergolab/sde_sim.hpp"
#include "support.hpp"

using namespace ergolab;
using ergolab::testing::constant_driver;
using ergolab::testing::cosine_driver;
using ergolab::testing::ou_model;

namespace {

VanishingDiscountConfig vd_config(std::size_t N = 2000) {
    VanishingDiscountConfig c;
    c.alphas = {0.2, 0.1, 0.05};
    c.bsde.cloud_size = N;
    c.bsde.degree = 6;
    c.bsde.seed = 9;
    return c;
}

DriverSpec cos_abs_z(double k) {
    DriverSpec d;
    d.psi = [k](std::span<const double> x, std::span<const double> z) { return std::cos(x[0]) - k * std::abs(z[0]); };
    d.M_psi = 1.0;
    d.depends_on_z = true;
    return d;
}

PathBundle reflected_bundle(const ConvexDomain& box, double T = 2.0, std::size_t n = 50) {
    SimConfig s;
    s.dt = 1e-2;
    s.horizon_T = T;
    s.n_paths = n;
    s.seed = 4;
    s.scheme = Scheme::projected;
    s.keep_increments = true;
    return simulate_reflected(ou_model(), box, Point{0.5}, s);
}

}  // namespace

TEST_CASE("constant driver: lambda = c and vbar = 0") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto sol = vanishing_discount(ou_model(), &box, constant_driver(0.4), vd_config());
    CHECK(sol.lambda == doctest::Approx(0.4).epsilon(1e-9));
    for (double x = -1.0; x <= 1.0; x += 0.1) CHECK(std::abs(evaluate_vbar(sol, Point{x})) < 1e-9);
    CHECK(sol.alpha_trace.size() == 3);
    CHECK(std::isnan(sol.alpha_trace[0].sup_change));
}

TEST_CASE("shifting psi by a constant shifts lambda and leaves vbar unchanged") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto a = vanishing_discount(ou_model(), &box, cosine_driver(0.0), vd_config());
    const auto b = vanishing_discount(ou_model(), &box, cosine_driver(0.35), vd_config());
    CHECK(b.lambda - a.lambda == doctest::Approx(0.35).epsilon(1e-6));
    for (std::size_t i = 0; i < a.alpha_trace.size(); ++i)
        CHECK(b.alpha_trace[i].lambda_alpha - a.alpha_trace[i].lambda_alpha == doctest::Approx(0.35).epsilon(1e-6));
    for (double x = -1.0; x <= 1.0; x += 0.1)
        CHECK(std::abs(evaluate_vbar(a, Point{x}) - evaluate_vbar(b, Point{x})) < 1e-8);
    CHECK(std::abs(evaluate_vbar(a, a.x_ref)) < 1e-12);
}

TEST_CASE("lambda^alpha is bounded and the trace is recorded") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto sol = vanishing_discount(ou_model(), &box, cos_abs_z(0.3), vd_config());
    for (const auto& row : sol.alpha_trace) CHECK(std::abs(row.lambda_alpha) <= 1.0);
    CHECK(sol.alpha_trace[2].sup_change < sol.alpha_trace[1].sup_change * 2.0);
}

TEST_CASE("schedule validation") {
    auto c = vd_config();
    c.alphas = {0.1, 0.2};
    CHECK_THROWS_AS(vanishing_discount(ou_model(), nullptr, cosine_driver(), c), std::invalid_argument);
    c.alphas = {0.1, 0.0};
    CHECK_THROWS_AS(vanishing_discount(ou_model(), nullptr, cosine_driver(), c), std::invalid_argument);
    c.alphas = {};
    CHECK_THROWS_AS(vanishing_discount(ou_model(), nullptr, cosine_driver(), c), std::invalid_argument);
}

TEST_CASE("Richardson extrapolation on synthetic sequences") {
    const std::vector<double> alphas{0.2, 0.1, 0.05, 0.02};
    SUBCASE("power law is recovered") {
        for (double r : {0.5, 1.0, 1.7}) {
            std::vector<double> lam;
            for (double a : alphas) lam.push_back(0.8 + 0.5 * std::pow(a, r));
            const auto fit = richardson_extrapolate(alphas, lam);
            CHECK(fit.lambda == doctest::Approx(0.8).epsilon(1e-8));
            CHECK(fit.r == doctest::Approx(r).epsilon(1e-6));
            CHECK(fit.extrapolated);
            CHECK_FALSE(fit.warning);
        }
    }
    SUBCASE("constant sequence") {
        const auto fit = richardson_extrapolate(alphas, {0.3, 0.3, 0.3, 0.3});
        CHECK(fit.lambda == 0.3);
        CHECK_FALSE(fit.extrapolated);
    }
    SUBCASE("non-monotone sequence falls back to r = 1 with a warning") {
        const auto fit = richardson_extrapolate(alphas, {0.5, 0.52, 0.51, 0.515});
        CHECK(fit.r == 1.0);
        CHECK(fit.warning);
        CHECK(fit.ci > std::abs(fit.lambda - 0.515));
    }
    SUBCASE("short schedules are not extrapolated") {
        const auto fit = richardson_extrapolate({0.1, 0.05}, {0.5, 0.52});
        CHECK(fit.lambda == 0.52);
        CHECK(fit.warning);
        CHECK(fit.ci == doctest::Approx(0.02));
    }
    CHECK_THROWS(richardson_extrapolate({0.1}, {}));
}

TEST_CASE("long-run averages agree across starting points") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto sol = vanishing_discount(ou_model(), &box, cosine_driver(), vd_config());
    LongRunConfig lr;
    lr.horizon_T = 20.0;
    lr.n_paths = 200;
    lr.seed = 3;
    const auto rep = check_lambda_uniqueness(ou_model(), &box, cosine_driver(), sol, {{0.0}, {-0.9}, {0.9}}, lr);
    CHECK(rep.pass);
    CHECK(rep.max_spread <= 0.05 * (std::abs(sol.lambda) + 0.1));
    for (double l : rep.lambdas) CHECK(std::abs(l - sol.lambda) < 0.05);
    CHECK_THROWS(check_lambda_uniqueness(ou_model(), &box, cosine_driver(), sol, {{0.0}}, lr));
    CHECK_THROWS(check_lambda_uniqueness(ou_model(), &box, cosine_driver(), sol, {{0.0}, {3.0}}, lr));
}

TEST_CASE("zero-Z injection reduces the long run to psi(x, 0)") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto sol = vanishing_discount(ou_model(), &box, cos_abs_z(0.5), vd_config());
    LongRunConfig lr;
    lr.horizon_T = 5.0;
    lr.n_paths = 50;
    lr.zero_z = true;
    const auto with_z = check_lambda_uniqueness(ou_model(), &box, cos_abs_z(0.5), sol, {{0.0}, {0.5}}, lr);
    const auto plain = check_lambda_uniqueness(ou_model(), &box, cosine_driver(), sol, {{0.0}, {0.5}}, lr);
    CHECK(with_z.lambdas == plain.lambdas);
}

TEST_CASE("Neumann transforms") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const auto sol = vanishing_discount(ou_model(), &box, cosine_driver(), vd_config());
    const PathBundle bundle = reflected_bundle(box);
    const auto base = zero_neumann_values(sol, bundle);
    const ScalarField one = [](std::span<const double>) { return 1.0; };
    const ScalarField two = [](std::span<const double>) { return 2.0; };

    SUBCASE("g = mu is the identity") {
        const auto t = neumann_transform_fixed_mu(sol, two, 2.0, bundle);
        CHECK(t.values == base.values);
    }
    SUBCASE("g = 1, mu = 0 subtracts the local time") {
        const auto t = neumann_transform_fixed_mu(sol, one, 0.0, bundle);
        double max_k = 0.0;
        for (std::size_t p = 0; p < bundle.n_paths; ++p)
            for (std::size_t k = 0; k < bundle.n_times(); ++k) {
                CHECK(t.at(p, k) == doctest::Approx(base.at(p, k) - bundle.K(p, k)).epsilon(1e-12));
                max_k = std::max(max_k, bundle.K(p, k));
            }
        CHECK(max_k > 0.0);
    }
    SUBCASE("fixed lambda adds (target - lambda0) t") {
        const auto t = neumann_transform_fixed_lambda(sol, sol.lambda + 1.0, two, 2.0, bundle);
        for (std::size_t p = 0; p < bundle.n_paths; ++p)
            for (std::size_t k = 0; k < bundle.n_times(); ++k)
                CHECK(t.at(p, k) - base.at(p, k) == doctest::Approx(bundle.times[k]).epsilon(1e-12));
    }
    SUBCASE("requires local time and g") {
        SimConfig s;
        s.horizon_T = 0.1;
        s.n_paths = 2;
        const PathBundle free = simulate_unreflected(ou_model(), Point{0.0}, s);
        CHECK_THROWS(neumann_transform_fixed_mu(sol, one, 0.0, free));
        CHECK_THROWS(neumann_transform_fixed_mu(sol, ScalarField{}, 0.0, bundle));
    }
}

TEST_CASE("EBSDE residual") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    const PathBundle bundle = reflected_bundle(box);

    SUBCASE("constant driver has zero defect") {
        const auto sol = vanishing_discount(ou_model(), &box, constant_driver(0.4), vd_config());
        const auto Y = zero_neumann_values(sol, bundle);
        const auto rep = ebsde_residual(Y, z_field_of(sol), constant_driver(0.4), sol.lambda, {}, 0.0, bundle, 5);
        CHECK(rep.mean_abs_defect < 1e-10);
        CHECK(rep.n_pairs == bundle.n_paths * (bundle.n_times() - 5));
    }
    SUBCASE("boundary terms of the transform cancel in the defect") {
        const auto sol = vanishing_discount(ou_model(), &box, cosine_driver(), vd_config());
        const ScalarField g = [](std::span<const double> x) { return 1.0 + 0.5 * x[0]; };
        const auto Y = zero_neumann_values(sol, bundle);
        const auto Yg = neumann_transform_fixed_mu(sol, g, 0.3, bundle);
        const auto zf = z_field_of(sol);
        for (std::size_t w : {1, 10}) {
            const auto r0 = ebsde_residual(Y, zf, cosine_driver(), sol.lambda, {}, 0.0, bundle, w);
            const auto r1 = ebsde_residual(Yg, zf, cosine_driver(), sol.lambda, g, 0.3, bundle, w);
            CHECK(r1.mean_abs_defect == doctest::Approx(r0.mean_abs_defect).epsilon(1e-9));
            CHECK(r1.signed_mean == doctest::Approx(r0.signed_mean).epsilon(1e-6));
        }
    }
    SUBCASE("a wrong lambda shows up as a signed drift") {
        const auto sol = vanishing_discount(ou_model(), &box, cosine_driver(), vd_config());
        const auto Y = zero_neumann_values(sol, bundle);
        const auto good = ebsde_residual(Y, z_field_of(sol), cosine_driver(), sol.lambda, {}, 0.0, bundle, 100);
        const auto bad = ebsde_residual(Y, z_field_of(sol), cosine_driver(), sol.lambda + 0.2, {}, 0.0, bundle, 100);
        CHECK(bad.signed_mean - good.signed_mean == doctest::Approx(0.2 * 1.0).epsilon(1e-6));
    }
    SUBCASE("shape errors") {
        const auto sol = vanishing_discount(ou_model(), &box, constant_driver(0.4), vd_config());
        const auto Y = zero_neumann_values(sol, bundle);
        CHECK_THROWS(ebsde_residual(Y, z_field_of(sol), constant_driver(0.4), 0.4, {}, 0.0, bundle, 0));
        CHECK_THROWS(ebsde_residual(Y, z_field_of(sol), constant_driver(0.4), 0.4, {}, 0.0, bundle, 10000));
    }
}
