#include "ergolab/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ergolab/rng.hpp"
#include "ergolab/stats.hpp"

namespace ergolab {

double evaluate_vbar(const ErgodicSolution& sol, std::span<const double> x) { return evaluate_value(sol.vbar, x).value; }

Point evaluate_vbar_z(const ErgodicSolution& sol, std::span<const double> x) { return evaluate_z(sol.vbar, x).z; }

namespace {

double ratio_at(double r, double a1, double a2, double a3) {
    return (std::pow(a1, r) - std::pow(a2, r)) / (std::pow(a2, r) - std::pow(a3, r));
}

}  // namespace

RichardsonFit richardson_extrapolate(const std::vector<double>& alphas, const std::vector<double>& lambdas) {
    if (alphas.size() != lambdas.size() || alphas.empty())
        throw std::invalid_argument("richardson_extrapolate: size mismatch");
    RichardsonFit fit;
    const std::size_t n = alphas.size();
    fit.lambda = lambdas.back();
    if (n < 3) {
        fit.warning = "fewer than three discount factors; no extrapolation";
        if (n == 2) fit.ci = std::abs(lambdas[1] - lambdas[0]);
        return fit;
    }
    const double a1 = alphas[n - 3], a2 = alphas[n - 2], a3 = alphas[n - 1];
    const double L1 = lambdas[n - 3], L2 = lambdas[n - 2], L3 = lambdas[n - 1];
    const double d12 = L1 - L2, d23 = L2 - L3;
    const double scale = 1e-12 * (1.0 + std::abs(L3));
    if (std::abs(d12) <= scale && std::abs(d23) <= scale) return fit;

    auto linear = [&](const std::string& why) {
        fit.r = 1.0;
        const double c = d23 / (a2 - a3);
        fit.lambda = L3 - c * a3;
        fit.extrapolated = true;
        fit.ci = 2.0 * std::abs(fit.lambda - L3) + std::abs(d23);
        fit.warning = why;
    };
    if (d12 * d23 <= 0.0) {
        linear("lambda^alpha sequence is not monotone; rate fixed at r = 1 and uncertainty widened");
        return fit;
    }
    const double target = d12 / d23;
    double lo = 0.05, hi = 5.0;
    double flo = ratio_at(lo, a1, a2, a3) - target, fhi = ratio_at(hi, a1, a2, a3) - target;
    if (flo * fhi > 0.0) {
        linear("rate fit out of range; r fixed at 1 and uncertainty widened");
        return fit;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = ratio_at(mid, a1, a2, a3) - target;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    fit.r = 0.5 * (lo + hi);
    const double c = d23 / (std::pow(a2, fit.r) - std::pow(a3, fit.r));
    fit.lambda = L3 - c * std::pow(a3, fit.r);
    fit.extrapolated = true;
    fit.ci = std::abs(fit.lambda - L3);
    return fit;
}

ErgodicSolution vanishing_discount(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                   const VanishingDiscountConfig& cfg) {
    if (cfg.alphas.empty()) throw std::invalid_argument("vanishing_discount: empty alpha schedule");
    for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
        if (!(cfg.alphas[i] > 0.0)) throw std::invalid_argument("vanishing_discount: alphas must be > 0");
        if (i > 0 && !(cfg.alphas[i] < cfg.alphas[i - 1]))
            throw std::invalid_argument("vanishing_discount: alpha schedule must be strictly decreasing");
    }
    const RegressionCloud cloud = build_cloud(model, domain, cfg.bsde);
    const Basis basis = make_basis(cfg.bsde, domain, cloud);
    const std::size_t d = model.dim;
    const std::size_t n_eval = std::min<std::size_t>(500, cloud.size());

    ErgodicSolution out;
    out.M_psi = driver.M_psi;
    out.x_ref = reference_point(domain, d);
    std::vector<double> prev, lambdas;
    for (double alpha : cfg.alphas) {
        DiscountedSolution sol = solve_discounted(model, domain, driver, alpha, cfg.bsde, cloud, basis);
        const double vref = evaluate_value(sol, out.x_ref).value;
        std::vector<double> cur(n_eval);
        for (std::size_t i = 0; i < n_eval; ++i)
            cur[i] = evaluate_value(sol, std::span<const double>(cloud.states.data() + i * d, d)).value - vref;
        AlphaTraceRow row{alpha, sol.lambda_alpha, 0.0};
        if (!prev.empty())
            for (std::size_t i = 0; i < n_eval; ++i) row.sup_change = std::max(row.sup_change, std::abs(cur[i] - prev[i]));
        else
            row.sup_change = std::numeric_limits<double>::quiet_NaN();
        out.alpha_trace.push_back(row);
        lambdas.push_back(sol.lambda_alpha);
        prev = std::move(cur);
        out.vbar = std::move(sol);
    }
    // Both basis families have the constant as element 0.
    out.vbar.coefficients[0] -= evaluate_value(out.vbar, out.x_ref).value;
    out.vbar.slice_coefficients.clear();
    out.vbar.slice_times.clear();

    const RichardsonFit fit = richardson_extrapolate(cfg.alphas, lambdas);
    out.lambda = fit.lambda;
    out.lambda_ci = fit.ci;
    out.r_fit = fit.r;
    out.extrapolated = fit.extrapolated;
    if (fit.warning) out.warnings.push_back(*fit.warning);
    if (std::abs(out.lambda) > driver.M_psi * (1.0 + 1e-9))
        out.warnings.push_back("extrapolated lambda exceeds M_psi");
    return out;
}

ZField z_field_of(const ErgodicSolution& sol) {
    return [&sol](std::span<const double> x, std::span<double> z) {
        const Point zz = evaluate_vbar_z(sol, x);
        std::copy(zz.begin(), zz.end(), z.begin());
    };
}

LambdaUniquenessReport check_lambda_uniqueness(const ModelSpec& model, const ConvexDomain* domain,
                                               const DriverSpec& driver, const ErgodicSolution& sol,
                                               const std::vector<Point>& start_points, const LongRunConfig& cfg) {
    if (start_points.size() < 2) throw std::invalid_argument("check_lambda_uniqueness: need >= 2 start points");
    if (!(cfg.dt > 0.0) || !(cfg.horizon_T > cfg.dt) || cfg.n_paths == 0)
        throw std::invalid_argument("check_lambda_uniqueness: invalid time grid or path count");
    const bool reflect = domain && !domain->is_whole_space();
    const std::size_t d = model.dim;
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(cfg.horizon_T / cfg.dt));
    const double sqdt = std::sqrt(cfg.dt);

    LambdaUniquenessReport rep;
    rep.starts = start_points;
    rep.reference_lambda = sol.lambda;
    for (std::size_t s = 0; s < start_points.size(); ++s) {
        const Point& x0 = start_points[s];
        if (x0.size() != d) throw std::invalid_argument("check_lambda_uniqueness: start dimension mismatch");
        if (reflect && !domain->contains(x0, 1e-12))
            throw std::invalid_argument("check_lambda_uniqueness: start point outside the domain");
        // Every start consumes the same Brownian paths.
        const NormalSource rng(derive_seed(cfg.seed, "long-run"));
        std::vector<double> per_path(cfg.n_paths);
        parallel_for_paths(cfg.n_paths, cfg.n_threads, [&](std::size_t b, std::size_t e) {
            Stepper stepper(model, reflect ? domain : nullptr, reflect ? Scheme::projected : Scheme::unreflected);
            Point x(d), dw(d), z(d, 0.0);
            for (std::size_t p = b; p < e; ++p) {
                x = x0;
                double acc = 0.0;
                for (std::size_t k = 0; k < n_steps; ++k) {
                    if (driver.depends_on_z && !cfg.zero_z) z = evaluate_vbar_z(sol, x);
                    acc += driver.psi(x, z) * cfg.dt;
                    rng.fill(p, k, 0, dw);
                    for (double& v : dw) v *= sqdt;
                    stepper.step(x, dw, cfg.dt);
                    for (double v : x)
                        if (!std::isfinite(v)) throw NonFiniteStateError(p, k);
                }
                per_path[p] = acc / (static_cast<double>(n_steps) * cfg.dt);
            }
        });
        const MeanEstimate est = mean_and_stderr(per_path);
        rep.lambdas.push_back(est.mean);
        rep.std_errors.push_back(est.std_error);
    }
    const auto [mn, mx] = std::minmax_element(rep.lambdas.begin(), rep.lambdas.end());
    rep.max_spread = *mx - *mn;
    rep.pass = rep.max_spread <= cfg.tol_rel * (std::abs(sol.lambda) + 0.1);
    return rep;
}

TrajectoryValues zero_neumann_values(const ErgodicSolution& sol, const PathBundle& bundle) {
    TrajectoryValues out;
    out.n_paths = bundle.n_paths;
    out.n_times = bundle.n_times();
    out.values.resize(out.n_paths * out.n_times);
    for (std::size_t p = 0; p < out.n_paths; ++p)
        for (std::size_t k = 0; k < out.n_times; ++k) out.values[p * out.n_times + k] = evaluate_vbar(sol, bundle.state(p, k));
    return out;
}

namespace {

TrajectoryValues transform(const ErgodicSolution& sol, double lambda_shift, const ScalarField& g, double mu,
                           const PathBundle& bundle) {
    if (!bundle.has_local_time()) throw std::invalid_argument("neumann transform: bundle has no local time");
    if (!g) throw std::invalid_argument("neumann transform: boundary cost g is required");
    TrajectoryValues out = zero_neumann_values(sol, bundle);
    const std::size_t nt = out.n_times;
    for (std::size_t p = 0; p < out.n_paths; ++p) {
        double boundary = 0.0;
        for (std::size_t k = 0; k < nt; ++k) {
            if (k > 0) {
                const double dk = bundle.K(p, k) - bundle.K(p, k - 1);
                if (dk != 0.0) boundary += (g(bundle.state(p, k - 1)) - mu) * dk;
            }
            out.values[p * nt + k] += lambda_shift * bundle.times[k] - boundary;
        }
    }
    return out;
}

}  // namespace

TrajectoryValues neumann_transform_fixed_mu(const ErgodicSolution& zero_sol, const ScalarField& g, double mu,
                                            const PathBundle& bundle) {
    return transform(zero_sol, 0.0, g, mu, bundle);
}

TrajectoryValues neumann_transform_fixed_lambda(const ErgodicSolution& zero_sol, double target_lambda,
                                                const ScalarField& g, double mu, const PathBundle& bundle) {
    return transform(zero_sol, target_lambda - zero_sol.lambda, g, mu, bundle);
}

ResidualReport ebsde_residual(const TrajectoryValues& Y, const ZField& z_field, const DriverSpec& driver,
                              double lambda, const ScalarField& g, double mu, const PathBundle& bundle,
                              std::size_t window) {
    if (window == 0) throw std::invalid_argument("ebsde_residual: window must be >= 1");
    if (!bundle.has_increments()) throw std::invalid_argument("ebsde_residual: bundle has no Brownian increments");
    if (g && !bundle.has_local_time()) throw std::invalid_argument("ebsde_residual: boundary cost needs local time");
    if (Y.n_paths != bundle.n_paths || Y.n_times != bundle.n_times())
        throw std::invalid_argument("ebsde_residual: values and bundle disagree in shape");
    const std::size_t d = bundle.dim;
    const std::size_t nt = bundle.n_times();
    if (nt <= window) throw std::invalid_argument("ebsde_residual: window longer than the bundle");

    // Per-interval increment of the forward sum, then windowed differences.
    std::vector<double> inc(nt - 1);
    double sum_abs = 0.0, sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    Point z(d);
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        for (std::size_t k = 0; k + 1 < nt; ++k) {
            const auto x = bundle.state(p, k);
            const double h = bundle.times[k + 1] - bundle.times[k];
            z_field(x, z);
            double v = (driver.psi(x, z) - lambda) * h;
            if (g) v += (g(x) - mu) * (bundle.K(p, k + 1) - bundle.K(p, k));
            v -= dot(z, bundle.increment(p, k));
            inc[k] = v;
        }
        double run = 0.0;
        for (std::size_t k = 0; k < window; ++k) run += inc[k];
        for (std::size_t k = 0; k + window < nt; ++k) {
            if (k > 0) run += inc[k + window - 1] - inc[k - 1];
            const double defect = Y.at(p, k) - Y.at(p, k + window) - run;
            sum_abs += std::abs(defect);
            sum += defect;
            sum_sq += defect * defect;
            ++count;
        }
    }
    ResidualReport rep;
    rep.n_pairs = count;
    const double n = static_cast<double>(count);
    rep.mean_abs_defect = sum_abs / n;
    rep.signed_mean = sum / n;
    rep.rms = std::sqrt(sum_sq / n);
    return rep;
}

}  // namespace ergolab
