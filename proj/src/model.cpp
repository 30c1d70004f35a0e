#include "ergolab/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ergolab/convex_domain.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

void ModelSpec::drift(std::span<const double> x, std::span<double> out) const {
    dissipative_drift(x, out);
    double buf[16];
    std::vector<double> heap;
    std::span<double> b;
    if (dim <= 16) {
        b = std::span<double>(buf, dim);
    } else {
        heap.resize(dim);
        b = heap;
    }
    bounded_drift(x, b);
    for (std::size_t i = 0; i < dim; ++i) out[i] += b[i];
}

void ModelSpec::validate() const {
    if (dim == 0) throw std::invalid_argument("model dimension must be positive");
    if (!dissipative_drift || !bounded_drift || !diffusion) throw std::invalid_argument("model callables missing");
    if (!(eta > 0.0)) throw std::invalid_argument("model eta must be > 0");
    if (!(sigma_bound > 0.0)) throw std::invalid_argument("model sigma_bound must be > 0");
    if (b_bound < 0.0 || Lambda < 0.0 || poly_growth_nu < 0.0) throw std::invalid_argument("model constants must be >= 0");
    if (!(hyp_lambda > 0.0)) throw std::invalid_argument("model hyp_lambda must be > 0");
}

ModelSpec with_penalization(const ModelSpec& model, const ConvexDomain& domain, double n) {
    if (domain.dim() != model.dim) throw std::invalid_argument("with_penalization: dimension mismatch");
    ModelSpec out = model;
    out.name = model.name + "+F_n";
    auto d = model.dissipative_drift;
    out.dissipative_drift = [d, domain, n](std::span<const double> x, std::span<double> res) {
        d(x, res);
        Point pen(x.size());
        penalization_drift(domain, n, x, pen);
        for (std::size_t i = 0; i < x.size(); ++i) res[i] += pen[i];
    };
    return out;
}

PairSampler ball_pair_sampler(std::size_t dim, std::uint64_t seed, double radius, double tail_radius,
                              double tail_fraction) {
    const NormalSource rng(derive_seed(seed, "model-check"));
    auto uniform_in_ball = [rng, dim](std::uint64_t idx, std::uint64_t which, double r) {
        Point p(dim);
        rng.fill(idx, which, 0, p);
        const double len = std::sqrt(norm2(p));
        double u[2];
        rng.fill_uniform(idx, which, u);
        const double rad = r * std::pow(u[0], 1.0 / static_cast<double>(dim));
        for (double& v : p) v *= len > 0.0 ? rad / len : 0.0;
        return p;
    };
    return [=](std::size_t index) {
        double u[2];
        rng.fill_uniform(index, 7, u);
        const double r = u[0] < tail_fraction ? tail_radius : radius;
        return PointPair{uniform_in_ball(index, 0, r), uniform_in_ball(index, 1, r)};
    };
}

DissipativityReport check_dissipativity(const ModelSpec& spec, const PairSampler& sampler, std::size_t n_pairs,
                                        double tol) {
    if (n_pairs == 0) throw std::invalid_argument("check_dissipativity: n_pairs must be >= 1");
    DissipativityReport rep;
    rep.worst_ratio = -std::numeric_limits<double>::infinity();
    Point dx(spec.dim), dy(spec.dim);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const auto [x, y] = sampler(k);
        double num = 0.0, den = 0.0;
        spec.dissipative_drift(x, dx);
        spec.dissipative_drift(y, dy);
        for (std::size_t i = 0; i < spec.dim; ++i) {
            num += (dx[i] - dy[i]) * (x[i] - y[i]);
            den += (x[i] - y[i]) * (x[i] - y[i]);
        }
        if (den == 0.0) continue;
        rep.worst_ratio = std::max(rep.worst_ratio, num / den);
        ++rep.pairs_used;
    }
    if (rep.pairs_used == 0) throw std::runtime_error("check_dissipativity: empty sample");
    rep.pass = rep.worst_ratio <= -spec.eta + tol * std::max(1.0, spec.eta);
    return rep;
}

SigmaStructureReport check_sigma_structure(const ModelSpec& spec, const PairSampler& sampler, std::size_t n_pairs,
                                           double tol) {
    if (n_pairs == 0) throw std::invalid_argument("check_sigma_structure: n_pairs must be >= 1");
    const std::size_t d = spec.dim;
    SigmaStructureReport rep;
    Eigen::MatrixXd sx(d, d), sxy(d, d);
    std::vector<double> bufx(d * d), bufxy(d * d);
    Point xy(d);
    auto load = [d](const std::vector<double>& buf, Eigen::MatrixXd& m) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m(i, j) = buf[i * d + j];
    };
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const auto [x, xp] = sampler(k);
        Eigen::VectorXd y(d);
        for (std::size_t i = 0; i < d; ++i) {
            y(i) = xp[i] - x[i];
            xy[i] = xp[i];
        }
        spec.diffusion(x, bufx);
        spec.diffusion(xy, bufxy);
        load(bufx, sx);
        load(bufxy, sxy);

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sx);
        const double smin = svd.singularValues()(d - 1);
        if (!(smin > 1e-14 * std::max(1.0, svd.singularValues()(0)))) {
            std::ostringstream msg;
            msg << "singular diffusion at x = (";
            for (std::size_t i = 0; i < d; ++i) msg << (i ? ", " : "") << x[i];
            msg << ")";
            throw NumericalError(msg.str());
        }
        rep.inverse_norm_sq = std::max(rep.inverse_norm_sq, 1.0 / (smin * smin));

        const double ny = y.norm();
        if (ny == 0.0) continue;
        const double lhs = ((sxy - sx).transpose() * y).norm();
        rep.Lambda_est = std::max(rep.Lambda_est, lhs / ny);
    }
    const double lam = spec.hyp_lambda;
    const double Lam = std::max(spec.Lambda, rep.Lambda_est);
    rep.condition_value = 2.0 * (lam - lam * lam * Lam * Lam) - rep.inverse_norm_sq;
    rep.pass = rep.condition_value > 0.0 && rep.Lambda_est <= spec.Lambda * (1.0 + tol) + 1e-12;
    return rep;
}

DriverReport check_driver(const DriverSpec& driver, std::size_t dim, const PairSampler& sampler,
                          std::size_t n_samples, double tol) {
    if (n_samples == 0) throw std::invalid_argument("check_driver: n_samples must be >= 1");
    DriverReport rep;
    const Point zero(dim, 0.0);
    Point z(dim), zp(dim);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const PointPair a = sampler(k);
        const PointPair b = sampler(k + n_samples);
        // z spans |z| <~ 2; every other sample takes a nearby z' to probe local slopes.
        for (std::size_t i = 0; i < dim; ++i) {
            z[i] = 0.2 * a.y[i];
            zp[i] = (k % 2 == 0) ? 0.2 * b.x[i] : z[i] + 1e-3 * b.x[i];
        }
        rep.worst_bound = std::max(rep.worst_bound, std::abs(driver.psi(a.x, zero)));
        double dz = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dz += (z[i] - zp[i]) * (z[i] - zp[i]);
        dz = std::sqrt(dz);
        if (dz == 0.0) continue;
        rep.worst_slope = std::max(rep.worst_slope, std::abs(driver.psi(a.x, z) - driver.psi(a.x, zp)) / dz);
    }
    rep.worst_violation = std::max(rep.worst_slope, rep.worst_bound);
    const double limit = driver.M_psi * (1.0 + tol);
    rep.pass = rep.worst_slope <= limit && rep.worst_bound <= limit;
    return rep;
}

}  // namespace ergolab
