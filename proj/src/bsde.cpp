#include "ergolab/bsde.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ergolab/rng.hpp"
#include "ergolab/sde_sim.hpp"

namespace ergolab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Point reference_point(const ConvexDomain* domain, std::size_t dim) {
    Point zero(dim, 0.0);
    if (!domain || domain->contains(zero)) return zero;
    return domain->anchor_c();
}

double truncation_horizon(double alpha, const BsdeConfig& cfg) {
    if (cfg.horizon_override > 0.0) return cfg.horizon_override;
    if (!(cfg.trunc_tol_rel > 0.0 && cfg.trunc_tol_rel < 1.0))
        throw std::invalid_argument("trunc_tol_rel must lie in (0, 1)");
    return std::log(1.0 / cfg.trunc_tol_rel) / alpha;
}

RegressionCloud build_cloud(const ModelSpec& model, const ConvexDomain* domain, const BsdeConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("bsde: dt must be positive");
    if (cfg.cloud_size < 2) throw std::invalid_argument("bsde: cloud_size must be >= 2");
    const std::size_t d = model.dim;
    const std::size_t N = cfg.cloud_size;
    const bool reflect = domain && !domain->is_whole_space();
    const Scheme scheme = reflect ? Scheme::projected : Scheme::unreflected;
    const Point start = cfg.cloud_start.empty() ? reference_point(domain, d) : cfg.cloud_start;
    if (start.size() != d) throw std::invalid_argument("bsde: cloud_start dimension mismatch");
    if (reflect && !domain->contains(start, 1e-12)) throw std::invalid_argument("bsde: cloud_start outside the domain");

    RegressionCloud cloud;
    cloud.dim = d;
    cloud.dt = cfg.dt;
    cloud.states.resize(N * d);
    cloud.next_states.resize(N * d);
    cloud.increments.resize(N * d);
    cloud.sigma.resize(N * d * d);

    const std::size_t burn_steps = static_cast<std::size_t>(std::llround(cfg.burn_in / cfg.dt));
    const NormalSource fwd(derive_seed(cfg.seed, "bsde-cloud"));
    const NormalSource one(derive_seed(cfg.seed, "bsde-step"));
    const double sqdt = std::sqrt(cfg.dt);

    parallel_for_paths(N, cfg.n_threads, [&](std::size_t begin, std::size_t end) {
        Stepper stepper(model, reflect ? domain : nullptr, scheme);
        Point x(d), dw(d);
        for (std::size_t i = begin; i < end; ++i) {
            x = start;
            for (std::size_t s = 0; s < burn_steps; ++s) {
                fwd.fill(i, s, 0, dw);
                for (double& v : dw) v *= sqdt;
                stepper.step(x, dw, cfg.dt);
            }
            for (std::size_t j = 0; j < d; ++j)
                if (!std::isfinite(x[j])) throw NonFiniteStateError(i, burn_steps);
            std::copy(x.begin(), x.end(), cloud.states.begin() + i * d);
            model.diffusion(x, std::span<double>(cloud.sigma.data() + i * d * d, d * d));
            one.fill(i, 0, 0, dw);
            for (double& v : dw) v *= sqdt;
            std::copy(dw.begin(), dw.end(), cloud.increments.begin() + i * d);
            stepper.step(x, dw, cfg.dt);
            std::copy(x.begin(), x.end(), cloud.next_states.begin() + i * d);
        }
    });

    cloud.lo.assign(d, std::numeric_limits<double>::infinity());
    cloud.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            cloud.lo[j] = std::min(cloud.lo[j], cloud.states[i * d + j]);
            cloud.hi[j] = std::max(cloud.hi[j], cloud.states[i * d + j]);
        }
    return cloud;
}

Basis make_basis(const BsdeConfig& cfg, const ConvexDomain* domain, const RegressionCloud& cloud) {
    const std::size_t d = cloud.dim;
    Point center(d), scale(d);
    const bool box = domain && domain->kind() == ConvexDomain::Kind::box;
    std::string family = cfg.basis;
    if (family == "auto") family = box ? "cosine" : "legendre";
    const Basis::Family fam = basis_family_from_string(family);
    if (fam == Basis::Family::cosine && !box)
        throw std::invalid_argument("cosine basis requires a box domain");
    if (box) {
        // Box faces are where phi vanishes; recover them by projecting far points.
        Point far(d), lo(d), hi(d);
        for (std::size_t j = 0; j < d; ++j) {
            std::fill(far.begin(), far.end(), 0.0);
            for (std::size_t i = 0; i < d; ++i) far[i] = domain->anchor_c()[i];
            far[j] = -1e300;
            Point p(d);
            domain->project(far, p);
            lo[j] = p[j];
            far[j] = 1e300;
            domain->project(far, p);
            hi[j] = p[j];
        }
        for (std::size_t j = 0; j < d; ++j) {
            center[j] = 0.5 * (lo[j] + hi[j]);
            scale[j] = 0.5 * (hi[j] - lo[j]);
        }
    } else {
        for (std::size_t j = 0; j < d; ++j) {
            center[j] = 0.5 * (cloud.lo[j] + cloud.hi[j]);
            scale[j] = std::max(0.5 * (cloud.hi[j] - cloud.lo[j]), 1e-6);
        }
    }
    return Basis(fam, d, cfg.degree, center, scale);
}

DiscountedSolution solve_discounted(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                    double alpha, const BsdeConfig& cfg) {
    if (!(alpha > 0.0)) throw std::invalid_argument("solve_discounted: alpha must be > 0");
    const RegressionCloud cloud = build_cloud(model, domain, cfg);
    const Basis basis = make_basis(cfg, domain, cloud);
    return solve_discounted(model, domain, driver, alpha, cfg, cloud, basis);
}

DiscountedSolution solve_discounted(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                    double alpha, const BsdeConfig& cfg, const RegressionCloud& cloud,
                                    const Basis& basis) {
    if (!(alpha > 0.0)) throw std::invalid_argument("solve_discounted: alpha must be > 0");
    if (!driver.psi) throw std::invalid_argument("solve_discounted: driver has no psi");
    if (cloud.dim != model.dim || basis.dim() != model.dim)
        throw std::invalid_argument("solve_discounted: dimension mismatch");
    const std::size_t d = model.dim;
    const std::size_t N = cloud.size();
    const std::size_t K = basis.size();
    const double dt = cloud.dt;

    RowMatrix B(N, K), Bn(N, K), D(N, K);
    {
        std::vector<double> grad(K * d), sdw(d);
        for (std::size_t i = 0; i < N; ++i) {
            std::span<const double> x(cloud.states.data() + i * d, d);
            std::span<const double> xn(cloud.next_states.data() + i * d, d);
            basis.eval(x, std::span<double>(B.row(i).data(), K));
            basis.eval(xn, std::span<double>(Bn.row(i).data(), K));
            basis.gradient(x, grad);
            const double* sg = cloud.sigma.data() + i * d * d;
            const double* dw = cloud.increments.data() + i * d;
            for (std::size_t a = 0; a < d; ++a) {
                sdw[a] = 0.0;
                for (std::size_t b = 0; b < d; ++b) sdw[a] += sg[a * d + b] * dw[b];
            }
            // grad b_k(x) sigma(x) dW has zero conditional mean: a control variate for b_k(X').
            for (std::size_t k = 0; k < K; ++k) {
                double s = 0.0;
                for (std::size_t a = 0; a < d; ++a) s += grad[k * d + a] * sdw[a];
                D(i, k) = s;
            }
        }
    }

    const Eigen::MatrixXd Bd = B;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Bd);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < K)
        throw NumericalError("rank-deficient design matrix for basis " + basis.id() + " at time slice 0 (rank " +
                             std::to_string(qr.rank()) + " < " + std::to_string(K) + ")");
    // Pseudo-inverse P = Pi R^{-1} Q^T from the thin factorization, O(N K^2).
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(N),
                                                                             static_cast<Eigen::Index>(K));
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    const Eigen::MatrixXd RinvQt = R.triangularView<Eigen::Upper>().solve(Q.transpose());
    const Eigen::MatrixXd P = qr.colsPermutation() * RinvQt;  // K x N
    const Eigen::MatrixXd A = P * (Bn - D);

    std::vector<Eigen::MatrixXd> M;
    if (driver.depends_on_z) {
        const Eigen::MatrixXd diffB = Bn - B;
        for (std::size_t j = 0; j < d; ++j) {
            Eigen::MatrixXd W = diffB;
            for (std::size_t i = 0; i < N; ++i) W.row(i) *= cloud.increments[i * d + j] / dt;
            M.push_back(P * W);
        }
    }

    Eigen::VectorXd psi0(N);
    {
        const Point zero(d, 0.0);
        for (std::size_t i = 0; i < N; ++i)
            psi0(i) = driver.psi(std::span<const double>(cloud.states.data() + i * d, d), zero);
    }

    DiscountedSolution sol;
    sol.alpha = alpha;
    sol.basis = basis;
    sol.diffusion = model.diffusion;
    sol.x_ref = reference_point(domain, d);
    sol.truncation_T = truncation_horizon(alpha, cfg);
    sol.M_psi = driver.M_psi;
    sol.hull_lo = cloud.lo;
    sol.hull_hi = cloud.hi;

    const std::size_t n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(sol.truncation_T / dt - 1e-9)));
    const double damp = 1.0 / (1.0 + alpha * dt);

    // Terminal slice: the constant mean(psi(x, 0)) / alpha, exact for constant drivers.
    Eigen::VectorXd c = Eigen::VectorXd::Zero(K);
    c(0) = psi0.mean() / alpha;

    auto store = [&](double t) {
        sol.slice_times.push_back(t);
        sol.slice_coefficients.emplace_back(c.data(), c.data() + K);
    };
    store(sol.truncation_T);

    const Eigen::VectorXd q0 = P * psi0;
    DriverSpec::BoundDriver bound;
    if (driver.depends_on_z && driver.bind_states) bound = driver.bind_states(cloud.states, d);
    Eigen::VectorXd zc(K), psi(N), zi(N);
    std::vector<Eigen::VectorXd> zcol(d, Eigen::VectorXd(N));
    Point z(d);
    for (std::size_t s = 0; s < n_steps; ++s) {
        if (driver.depends_on_z) {
            for (std::size_t j = 0; j < d; ++j) zcol[j].noalias() = B * (M[j] * c);
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = 0; j < d; ++j) z[j] = zcol[j](i);
                psi(i) = bound ? bound(i, z) : driver.psi(std::span<const double>(cloud.states.data() + i * d, d), z);
            }
            c = damp * (A * c + dt * (P * psi));
        } else {
            c = damp * (A * c + dt * q0);
        }
        if (!c.allFinite()) throw NumericalError("solve_discounted: coefficients diverged at step " + std::to_string(s));
        const std::size_t remaining = n_steps - s - 1;
        if (remaining == 0 || (cfg.slice_stride > 0 && remaining % cfg.slice_stride == 0))
            store(static_cast<double>(remaining) * dt);
    }
    sol.coefficients.assign(c.data(), c.data() + K);

    sol.lambda_alpha = alpha * evaluate_value(sol, sol.x_ref).value;
    BsdeDiagnostics& diag = sol.diagnostics;
    diag.truncation_bound = driver.M_psi * std::exp(-alpha * static_cast<double>(n_steps) * dt) / alpha;
    diag.n_steps = n_steps;
    diag.cloud_size = N;
    diag.basis_size = K;
    diag.dt = dt;
    const Eigen::VectorXd values = B * c;
    diag.max_abs_value_on_cloud = values.cwiseAbs().maxCoeff();
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    diag.transition_spectral_bound = es.eigenvalues().cwiseAbs().maxCoeff() * damp;
    return sol;
}

namespace {

bool outside_hull(const DiscountedSolution& sol, std::span<const double> x) {
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double tol = 1e-9 * (1.0 + std::abs(sol.hull_hi[j] - sol.hull_lo[j]));
        if (x[j] < sol.hull_lo[j] - tol || x[j] > sol.hull_hi[j] + tol) return true;
    }
    return false;
}

}  // namespace

ValueEvaluation evaluate_value(const DiscountedSolution& sol, std::span<const double> x) {
    if (x.size() != sol.basis.dim()) throw std::invalid_argument("evaluate_value: dimension mismatch");
    std::vector<double> b(sol.basis.size());
    sol.basis.eval(x, b);
    ValueEvaluation out;
    for (std::size_t k = 0; k < b.size(); ++k) out.value += b[k] * sol.coefficients[k];
    out.extrapolated = outside_hull(sol, x);
    return out;
}

ZEvaluation evaluate_z(const DiscountedSolution& sol, std::span<const double> x) {
    const std::size_t d = sol.basis.dim();
    if (x.size() != d) throw std::invalid_argument("evaluate_z: dimension mismatch");
    const std::size_t K = sol.basis.size();
    std::vector<double> grad(K * d), g(d, 0.0), sigma(d * d);
    sol.basis.gradient(x, grad);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t a = 0; a < d; ++a) g[a] += sol.coefficients[k] * grad[k * d + a];
    sol.diffusion(x, sigma);
    ZEvaluation out;
    out.z.assign(d, 0.0);
    for (std::size_t b = 0; b < d; ++b)
        for (std::size_t a = 0; a < d; ++a) out.z[b] += g[a] * sigma[a * d + b];
    out.extrapolated = outside_hull(sol, x);
    return out;
}

}  // namespace ergolab
