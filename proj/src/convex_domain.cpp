#include "ergolab/convex_domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ergolab/rng.hpp"

namespace ergolab {

ConvexDomain::ConvexDomain(Kind kind, std::size_t dim, ScalarField phi, VectorField grad_phi,
                           VectorField project, Point anchor_c, double anchor_gamma, std::string description)
    : kind_(kind),
      dim_(dim),
      phi_(std::move(phi)),
      grad_phi_(std::move(grad_phi)),
      project_(std::move(project)),
      anchor_c_(std::move(anchor_c)),
      anchor_gamma_(anchor_gamma),
      description_(std::move(description)) {
    if (dim_ == 0) throw std::invalid_argument("domain dimension must be positive");
    if (anchor_c_.size() != dim_) throw std::invalid_argument("anchor dimension mismatch");
    if (!(anchor_gamma_ > 0.0)) throw std::invalid_argument("anchor gamma must be positive");
}

ConvexDomain make_whole_space(std::size_t dim) {
    return ConvexDomain(
        ConvexDomain::Kind::whole_space, dim, [](std::span<const double>) { return 1.0; },
        [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
        [](std::span<const double> x, std::span<double> out) { std::copy(x.begin(), x.end(), out.begin()); },
        Point(dim, 0.0), 1.0, "whole_space");
}

ConvexDomain make_half_space(const Point& normal, double offset) {
    const double nn = std::sqrt(norm2(normal));
    if (normal.empty() || !(nn > 0.0)) throw std::invalid_argument("half_space: normal must be non-zero");
    Point n(normal);
    for (double& v : n) v /= nn;
    const double off = offset / nn;
    const std::size_t dim = n.size();

    // phi(x) = (n, x) - off has unit gradient everywhere.
    auto phi = [n, off](std::span<const double> x) { return dot(n, x) - off; };
    auto grad = [n](std::span<const double>, std::span<double> out) { std::copy(n.begin(), n.end(), out.begin()); };
    auto project = [n, off](std::span<const double> x, std::span<double> out) {
        const double s = std::min(0.0, dot(n, x) - off);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - s * n[i];
    };
    // c one unit deep inside: (x - c, beta) = |phi| (|phi| + 1) >= |beta|.
    Point c(dim);
    for (std::size_t i = 0; i < dim; ++i) c[i] = (off + 1.0) * n[i];
    std::ostringstream desc;
    desc << "half_space(dim=" << dim << ", offset=" << off << ")";
    return ConvexDomain(ConvexDomain::Kind::half_space, dim, phi, grad, project, c, 1.0, desc.str());
}

ConvexDomain make_ball(const Point& center, double radius) {
    if (center.empty()) throw std::invalid_argument("ball: empty center");
    if (!(radius > 0.0)) throw std::invalid_argument("ball: radius must be positive");
    const std::size_t dim = center.size();
    const double r = radius;

    auto dist = [center](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center[i]) * (x[i] - center[i]);
        return std::sqrt(s);
    };
    // r - |x - c| away from the center; C^1 quadratic cap r - (s^2/r + r/4) inside s <= r/2.
    auto phi = [dist, r](std::span<const double> x) {
        const double s = dist(x);
        return s > 0.5 * r ? r - s : r - (s * s / r + 0.25 * r);
    };
    auto grad = [dist, center, r](std::span<const double> x, std::span<double> out) {
        const double s = dist(x);
        const double scale = s > 0.5 * r ? -1.0 / s : -2.0 / r;
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * (x[i] - center[i]);
    };
    auto project = [dist, center, r](std::span<const double> x, std::span<double> out) {
        const double s = dist(x);
        const double k = s > r ? r / s : 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = center[i] + k * (x[i] - center[i]);
    };
    // (x - c, beta) = |x - c| |beta| >= r |beta|.
    std::ostringstream desc;
    desc << "ball(dim=" << dim << ", radius=" << r << ")";
    return ConvexDomain(ConvexDomain::Kind::ball, dim, phi, grad, project, center, r, desc.str());
}

ConvexDomain make_box(const Point& lo, const Point& hi) {
    if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("box: lo/hi dimension mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("box: require lo < hi in every coordinate");
    const std::size_t dim = lo.size();

    // Signed distance to the nearest face, positive inside.
    auto phi = [lo, hi](std::span<const double> x) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < x.size(); ++i) m = std::min({m, x[i] - lo[i], hi[i] - x[i]});
        return m;
    };
    auto grad = [lo, hi](std::span<const double> x, std::span<double> out) {
        double m = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        double sign = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] = 0.0;
            if (x[i] - lo[i] < m) {
                m = x[i] - lo[i];
                arg = i;
                sign = 1.0;
            }
            if (hi[i] - x[i] < m) {
                m = hi[i] - x[i];
                arg = i;
                sign = -1.0;
            }
        }
        out[arg] = sign;
    };
    auto project = [lo, hi](std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo[i], hi[i]);
    };
    Point c(dim);
    double gamma = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dim; ++i) {
        c[i] = 0.5 * (lo[i] + hi[i]);
        gamma = std::min(gamma, 0.5 * (hi[i] - lo[i]));
    }
    std::ostringstream desc;
    desc << "box(dim=" << dim << ")";
    return ConvexDomain(ConvexDomain::Kind::box, dim, phi, grad, project, c, gamma, desc.str());
}

ConvexDomain make_custom_domain(std::size_t dim, ScalarField phi, VectorField grad_phi, VectorField project,
                                Point anchor_c, double anchor_gamma, std::string description) {
    return ConvexDomain(ConvexDomain::Kind::custom, dim, std::move(phi), std::move(grad_phi), std::move(project),
                        std::move(anchor_c), anchor_gamma, std::move(description));
}

void beta(const ConvexDomain& domain, std::span<const double> x, std::span<double> out) {
    domain.project(x, out);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - out[i];
}

Point beta(const ConvexDomain& domain, std::span<const double> x) {
    Point out(x.size());
    beta(domain, x, out);
    return out;
}

void penalization_drift(const ConvexDomain& domain, double n, std::span<const double> x, std::span<double> out) {
    beta(domain, x, out);
    for (double& v : out) v *= -2.0 * n;
}

Point penalization_drift(const ConvexDomain& domain, double n, std::span<const double> x) {
    Point out(x.size());
    penalization_drift(domain, n, x, out);
    return out;
}

bool DomainInvariantReport::pass(double tol) const {
    return interior_fixed_point <= tol && boundary_normal <= 1e-6 && obtuse_angle <= tol && monotonicity <= tol &&
           anchor <= tol && idempotence <= tol && nonexpansive <= tol && penalty_dissipativity <= tol;
}

DomainInvariantReport check_domain_invariants(const ConvexDomain& domain, std::uint64_t seed, std::size_t n_samples,
                                              double radius) {
    const std::size_t d = domain.dim();
    NormalSource rng(derive_seed(seed, "domain-check"));
    DomainInvariantReport rep;
    rep.interior_fixed_point = rep.boundary_normal = rep.obtuse_angle = rep.monotonicity = rep.anchor =
        rep.idempotence = rep.nonexpansive = rep.penalty_dissipativity = -std::numeric_limits<double>::infinity();

    Point x(d), y(d), px(d), py(d), ppx(d), bx(d), by(d), g(d), tmp(d);
    const Point& c = domain.anchor_c();
    auto draw = [&](std::uint64_t idx, Point& out) {
        rng.fill(idx, 0, 0, out);
        for (std::size_t i = 0; i < d; ++i) out[i] = c[i] + radius * out[i] / std::sqrt(static_cast<double>(d));
    };
    auto dist = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };

    for (std::size_t k = 0; k < n_samples; ++k) {
        draw(2 * k, x);
        draw(2 * k + 1, y);
        domain.project(x, px);
        domain.project(y, py);
        domain.project(px, ppx);
        beta(domain, x, bx);
        beta(domain, y, by);
        const double scale = 1.0 + std::sqrt(norm2(x)) + std::sqrt(norm2(y));
        const double eps = 1e-12 * scale * scale;

        if (domain.contains(x)) rep.interior_fixed_point = std::max(rep.interior_fixed_point, dist(px, x) - eps);
        rep.idempotence = std::max(rep.idempotence, dist(ppx, px) - eps);
        rep.nonexpansive = std::max(rep.nonexpansive, dist(px, py) - dist(x, y) - eps);

        // x' = P(y) is in closure(G): (x' - x, beta(x)) <= 0.
        for (std::size_t i = 0; i < d; ++i) tmp[i] = py[i] - x[i];
        rep.obtuse_angle = std::max(rep.obtuse_angle, dot(tmp, bx) - eps);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] - x[i];
        rep.monotonicity = std::max(rep.monotonicity, dot(tmp, bx) - dot(by, bx) - eps);

        for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] - c[i];
        rep.anchor = std::max(rep.anchor, domain.anchor_gamma() * std::sqrt(norm2(bx)) - dot(tmp, bx) - eps);

        // F_1(x) - F_1(y) = -2 (beta(x) - beta(y)).
        double pen = 0.0;
        for (std::size_t i = 0; i < d; ++i) pen += -2.0 * (bx[i] - by[i]) * (x[i] - y[i]);
        rep.penalty_dissipativity = std::max(rep.penalty_dissipativity, pen - eps);

        // Boundary point: project an exterior point (px lies on the boundary when x is outside).
        if (!domain.is_whole_space() && !domain.contains(x)) {
            domain.grad_phi(px, g);
            rep.boundary_normal = std::max(rep.boundary_normal, std::abs(std::sqrt(norm2(g)) - 1.0));
        }
    }
    if (rep.boundary_normal == -std::numeric_limits<double>::infinity()) rep.boundary_normal = 0.0;
    if (rep.interior_fixed_point == -std::numeric_limits<double>::infinity()) rep.interior_fixed_point = 0.0;
    return rep;
}

}  // namespace ergolab
