#include "ergolab/pde_oracle.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ergolab {

void GridProblem::validate() const {
    if (!(a < b)) throw std::invalid_argument("grid problem: require a < b");
    if (n_cells < 16) throw std::invalid_argument("grid problem: n_cells must be >= 16");
    if (!f || !sigma || !psi) throw std::invalid_argument("grid problem: f, sigma and psi are required");
    if (mode == PdeMode::discounted && !(alpha > 0.0)) throw std::invalid_argument("grid problem: alpha must be > 0");
    if (mode == PdeMode::ergodic && (x_ref < a || x_ref > b))
        throw std::invalid_argument("grid problem: x_ref outside [a, b]");
}

namespace {

struct Discretization {
    const GridProblem& p;
    std::size_t n;  // nodes 0..n
    double h;
    std::vector<double> x, f, s2, sig;

    explicit Discretization(const GridProblem& prob) : p(prob), n(prob.n_cells) {
        h = (p.b - p.a) / static_cast<double>(n);
        x.resize(n + 1);
        f.resize(n + 1);
        s2.resize(n + 1);
        sig.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            x[i] = p.a + static_cast<double>(i) * h;
            f[i] = p.f(x[i]);
            sig[i] = p.sigma(x[i]);
            if (!(std::abs(sig[i]) > 1e-12))
                throw NumericalError("ellipticity violated: sigma vanishes at x = " + std::to_string(x[i]));
            s2[i] = sig[i] * sig[i];
        }
    }

    // Ghost nodes v_{-1} = v_1 and v_{n+1} = v_{n-1}.
    double left(const Eigen::VectorXd& v, std::size_t i) const { return i == 0 ? v(1) : v(i - 1); }
    double right(const Eigen::VectorXd& v, std::size_t i) const { return i == n ? v(n - 1) : v(i + 1); }

    double dpsi_dz(double xi, double z) const {
        if (p.psi_z) return p.psi_z(xi, z);
        const double eps = 1e-6 * (1.0 + std::abs(z));
        return (p.psi(xi, z + eps) - p.psi(xi, z - eps)) / (2.0 * eps);
    }

    /// Residual of the nodal equations (without the -lambda / -alpha v term).
    double operator_at(const Eigen::VectorXd& v, std::size_t i, double* dz = nullptr) const {
        const double vl = left(v, i), vr = right(v, i);
        const double d1 = (vr - vl) / (2.0 * h);
        const double d2 = (vr - 2.0 * v(i) + vl) / (h * h);
        if (dz) *dz = d1 * sig[i];
        return 0.5 * s2[i] * d2 + f[i] * d1 + p.psi(x[i], d1 * sig[i]);
    }
};

void interpolation_weights(const Discretization& D, double xr, std::size_t& j, double& w) {
    const double t = (xr - D.p.a) / D.h;
    j = std::min<std::size_t>(D.n - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t))));
    w = t - static_cast<double>(j);
}

PdeSolution solve(const GridProblem& prob) {
    prob.validate();
    const Discretization D(prob);
    const std::size_t n = D.n;
    const bool ergodic = prob.mode == PdeMode::ergodic;
    const std::size_t m = ergodic ? n + 2 : n + 1;
    std::size_t jr = 0;
    double wr = 0.0;
    if (ergodic) interpolation_weights(D, prob.x_ref, jr, wr);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    auto residual_vec = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(m));
        const Eigen::VectorXd v = w.head(static_cast<Eigen::Index>(n + 1));
        for (std::size_t i = 0; i <= n; ++i)
            r(i) = D.operator_at(v, i) - (ergodic ? w(n + 1) : prob.alpha * v(i));
        if (ergodic) r(n + 1) = (1.0 - wr) * v(jr) + wr * v(jr + 1);
        return r;
    };

    Eigen::VectorXd r = residual_vec(u);
    double res = r.cwiseAbs().maxCoeff();
    std::size_t iter = 0;
    bool stalled = false;  // Newton update at round-off level
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    while (res > prob.tol && iter < prob.max_iter && !stalled) {
        ++iter;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(4 * m);
        const Eigen::VectorXd v = u.head(static_cast<Eigen::Index>(n + 1));
        for (std::size_t i = 0; i <= n; ++i) {
            double z = 0.0;
            D.operator_at(v, i, &z);
            const double adv = D.f[i] + D.dpsi_dz(D.x[i], z) * D.sig[i];
            const double diff = 0.5 * D.s2[i] / (D.h * D.h);
            const double cl = diff - adv / (2.0 * D.h);
            const double cr = diff + adv / (2.0 * D.h);
            const auto I = static_cast<int>(i);
            if (i == 0) {
                trip.emplace_back(I, 1, cl + cr);
            } else if (i == n) {
                trip.emplace_back(I, I - 1, cl + cr);
            } else {
                trip.emplace_back(I, I - 1, cl);
                trip.emplace_back(I, I + 1, cr);
            }
            trip.emplace_back(I, I, -2.0 * diff - (ergodic ? 0.0 : prob.alpha));
            if (ergodic) trip.emplace_back(I, static_cast<int>(n + 1), -1.0);
        }
        if (ergodic) {
            trip.emplace_back(static_cast<int>(n + 1), static_cast<int>(jr), 1.0 - wr);
            trip.emplace_back(static_cast<int>(n + 1), static_cast<int>(jr + 1), wr);
        }
        Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        J.setFromTriplets(trip.begin(), trip.end());
        lu.compute(J);
        if (lu.info() != Eigen::Success) throw NumericalError("PDE Newton: singular Jacobian at iteration " + std::to_string(iter));
        const Eigen::VectorXd delta = lu.solve(-r);
        stalled = delta.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + u.cwiseAbs().maxCoeff());

        double step = 1.0;
        Eigen::VectorXd trial = u + delta;
        Eigen::VectorXd rt = residual_vec(trial);
        double rtn = rt.cwiseAbs().maxCoeff();
        for (int k = 0; k < 30 && !(rtn < res); ++k) {
            step *= 0.5;
            trial = u + step * delta;
            rt = residual_vec(trial);
            rtn = rt.cwiseAbs().maxCoeff();
        }
        if (!(rtn < res)) {
            stalled = stalled || rtn <= prob.tol;
            if (!stalled) break;
            continue;
        }
        u = trial;
        r = rt;
        res = rtn;
    }
    if (!(res <= prob.tol) && !stalled)
        throw NumericalError("PDE Newton did not converge in " + std::to_string(iter) +
                             " iterations (last residual " + std::to_string(res) + ")");

    PdeSolution sol;
    sol.x = D.x;
    sol.v.assign(u.data(), u.data() + n + 1);
    sol.lambda = ergodic ? u(n + 1) : 0.0;
    sol.residual = res;
    sol.iterations = iter;
    const Eigen::VectorXd v = u.head(static_cast<Eigen::Index>(n + 1));
    sol.flux_a = (v(1) - D.left(v, 0)) / (2.0 * D.h);
    sol.flux_b = (D.right(v, n) - v(n - 1)) / (2.0 * D.h);
    sol.one_sided_flux_a = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * D.h);
    sol.one_sided_flux_b = (3.0 * v(n) - 4.0 * v(n - 1) + v(n - 2)) / (2.0 * D.h);
    if (!ergodic && prob.M_psi > 0.0) {
        const double bound = prob.M_psi / prob.alpha;
        for (double val : sol.v)
            if (std::abs(val) > bound * (1.0 + 1e-12)) sol.bound_ok = false;
    }
    return sol;
}

}  // namespace

PdeSolution solve_ergodic_pde(const GridProblem& prob) {
    if (prob.mode != PdeMode::ergodic) throw std::invalid_argument("solve_ergodic_pde: mode must be ergodic");
    return solve(prob);
}

PdeSolution solve_discounted_pde(const GridProblem& prob) {
    if (prob.mode != PdeMode::discounted) throw std::invalid_argument("solve_discounted_pde: mode must be discounted");
    return solve(prob);
}

double interpolate(const PdeSolution& sol, double x) {
    const std::size_t n = sol.x.size() - 1;
    if (x <= sol.x.front()) return sol.v.front();
    if (x >= sol.x.back()) return sol.v.back();
    const double h = (sol.x.back() - sol.x.front()) / static_cast<double>(n);
    const std::size_t j = std::min(n - 1, static_cast<std::size_t>((x - sol.x.front()) / h));
    const double w = (x - sol.x[j]) / h;
    return (1.0 - w) * sol.v[j] + w * sol.v[j + 1];
}

GridProblem grid_problem_from_model(const ModelSpec& model, const DriverSpec& driver, double a, double b,
                                    std::size_t n_cells, PdeMode mode, double alpha) {
    if (model.dim != 1) throw std::invalid_argument("grid problem: the PDE oracle is one-dimensional");
    GridProblem p;
    p.a = a;
    p.b = b;
    p.n_cells = n_cells;
    p.mode = mode;
    p.alpha = alpha;
    p.M_psi = driver.M_psi;
    p.x_ref = (a <= 0.0 && 0.0 <= b) ? 0.0 : 0.5 * (a + b);
    p.f = [model](double x) {
        double out = 0.0;
        model.drift(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    };
    p.sigma = [model](double x) {
        double out = 0.0;
        model.diffusion(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    };
    DriverFn psi = driver.psi;
    p.psi = [psi](double x, double z) { return psi(std::span<const double>(&x, 1), std::span<const double>(&z, 1)); };
    return p;
}

}  // namespace ergolab
