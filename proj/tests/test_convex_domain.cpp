#include "doctest.h"

#include <cmath>

#include "ergolab/convex_domain.hpp"

using namespace ergolab;

TEST_CASE("beta examples") {
    const ConvexDomain half = make_half_space({1.0, 0.0}, 0.0);
    CHECK(beta(half, Point{-2.0, 3.0}) == Point{-2.0, 0.0});
    const ConvexDomain ball = make_ball({0.0, 0.0}, 1.0);
    const Point b = beta(ball, Point{2.0, 0.0});
    CHECK(b[0] == doctest::Approx(1.0));
    CHECK(b[1] == doctest::Approx(0.0));
    CHECK(beta(ball, Point{0.3, -0.2}) == Point{0.0, 0.0});
    CHECK(beta(half, Point{0.5, -7.0}) == Point{0.0, 0.0});
}

TEST_CASE("penalization drift examples") {
    const ConvexDomain ball = make_ball({0.0, 0.0}, 1.0);
    const Point f = penalization_drift(ball, 4.0, Point{2.0, 0.0});
    CHECK(f[0] == doctest::Approx(-8.0));
    CHECK(f[1] == doctest::Approx(0.0));
    CHECK(penalization_drift(ball, 1000.0, Point{0.5, 0.5}) == Point{0.0, 0.0});
    const ConvexDomain half = make_half_space({1.0, 0.0}, 0.0);
    const Point g = penalization_drift(half, 1.0, Point{-0.5, 1.0});
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("box projection is a clamp") {
    const ConvexDomain box = make_box({-1.0}, {1.0});
    Point out(1);
    box.project(Point{3.5}, out);
    CHECK(out[0] == 1.0);
    box.project(Point{-1.5}, out);
    CHECK(out[0] == -1.0);
    box.project(Point{0.25}, out);
    CHECK(out[0] == 0.25);
}

TEST_CASE("half-space projection zeroes the negative first coordinate") {
    const ConvexDomain half = make_half_space({1.0, 0.0}, 0.0);
    Point out(2);
    half.project(Point{-3.0, 2.0}, out);
    CHECK(out == Point{0.0, 2.0});
}

TEST_CASE("normalized boundary gradient") {
    const ConvexDomain ball = make_ball({1.0, -1.0}, 2.0);
    Point g(2);
    for (int k = 0; k < 16; ++k) {
        const double a = 0.39 * k;
        const Point x{1.0 + 2.0 * std::cos(a), -1.0 + 2.0 * std::sin(a)};
        CHECK(std::abs(ball.phi(x)) < 1e-12);
        ball.grad_phi(x, g);
        CHECK(std::hypot(g[0], g[1]) == doctest::Approx(1.0).epsilon(1e-6));
        // inward normal
        CHECK(g[0] * (1.0 - x[0]) + g[1] * (-1.0 - x[1]) > 0.0);
    }
}

TEST_CASE("sampled invariants hold for every built-in kind") {
    const ConvexDomain domains[] = {
        make_half_space({1.0, 1.0}, 0.5),
        make_ball({0.5, 0.0}, 1.5),
        make_box({-1.0, 0.0}, {1.0, 3.0}),
        make_box({-1.0}, {1.0}),
        make_ball({0.0, 0.0, 0.0}, 1.0),
    };
    for (const auto& d : domains) {
        const auto r = check_domain_invariants(d, 11);
        INFO(d.description());
        CHECK(r.pass());
        CHECK(r.anchor <= 1e-9);
        CHECK(r.penalty_dissipativity <= 1e-9);
        CHECK(r.nonexpansive <= 1e-9);
        CHECK(r.idempotence <= 1e-12);
    }
}

TEST_CASE("degenerate parameters are rejected") {
    CHECK_THROWS(make_ball({0.0}, 0.0));
    CHECK_THROWS(make_ball({0.0}, -1.0));
    CHECK_THROWS(make_box({1.0}, {1.0}));
    CHECK_THROWS(make_box({0.0, 2.0}, {1.0, 1.0}));
    CHECK_THROWS(make_half_space({0.0, 0.0}, 0.0));
}

TEST_CASE("a broken custom projection is caught by the invariant check") {
    // Shrinks towards the origin instead of projecting onto [-1, 1].
    const ConvexDomain bad = make_custom_domain(
        1, [](std::span<const double> x) { return 1.0 - std::abs(x[0]); },
        [](std::span<const double> x, std::span<double> o) { o[0] = x[0] > 0 ? -1.0 : 1.0; },
        [](std::span<const double> x, std::span<double> o) { o[0] = 0.5 * x[0]; }, Point{0.0}, 1.0);
    CHECK_FALSE(check_domain_invariants(bad, 3).pass());
}
