#include "ergolab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ergolab/stats.hpp"

namespace ergolab {

std::vector<TestFunction> default_test_battery(std::size_t dim) {
    std::vector<TestFunction> out;
    const double w = 1.0 / std::sqrt(static_cast<double>(dim));
    out.push_back({"tanh", [w](std::span<const double> x) {
                       double s = 0.0;
                       for (double v : x) s += w * v;
                       return std::tanh(s);
                   },
                   1.0});
    out.push_back({"bump", [](std::span<const double> x) { return std::exp(-norm2(x)); }, 1.0});
    out.push_back({"sin", [](std::span<const double> x) { return std::sin(x[0] + 0.5); }, 1.0});
    return out;
}

namespace {

struct BatchSums {
    std::vector<double> sum, sumsq;  // [fn][time]
};

double fit_rate(const std::vector<double>& t, const std::vector<double>& gap, const std::vector<std::size_t>& idx,
                double* intercept = nullptr) {
    std::vector<double> xs, ys;
    for (std::size_t k : idx) {
        if (!(gap[k] > 0.0)) continue;
        xs.push_back(t[k]);
        ys.push_back(std::log(gap[k]));
    }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const LineFit f = fit_line(xs, ys);
    if (intercept) *intercept = f.intercept;
    return -f.slope;
}

}  // namespace

std::vector<MixingReport> estimate_semigroup_gap(const ModelSpec& model, const Point& x, const Point& y,
                                                 const std::vector<TestFunction>& test_functions,
                                                 const MixingConfig& cfg, const ConvexDomain* domain) {
    if (test_functions.empty()) throw std::invalid_argument("estimate_semigroup_gap: no test functions");
    if (x.size() != model.dim || y.size() != model.dim)
        throw std::invalid_argument("estimate_semigroup_gap: start point dimension mismatch");
    if (cfg.n_batches < 2 || cfg.n_paths < cfg.n_batches)
        throw std::invalid_argument("estimate_semigroup_gap: need n_paths >= n_batches >= 2");
    if (cfg.scheme != Scheme::unreflected && !domain)
        throw std::invalid_argument("estimate_semigroup_gap: scheme needs a domain");
    SimConfig sc;
    sc.dt = cfg.dt;
    sc.horizon_T = cfg.horizon_T;
    sc.n_paths = cfg.n_paths;
    sc.record_stride = cfg.record_stride;
    sc.scheme = cfg.scheme;
    sc.penalization_n = cfg.penalization_n;
    sc.validate();

    const std::size_t d = model.dim;
    const std::size_t nf = test_functions.size();
    const std::size_t n_steps = sc.n_steps();
    std::vector<double> times{0.0};
    for (std::size_t s = 1; s <= n_steps; ++s)
        if (s % cfg.record_stride == 0 || s == n_steps) times.push_back(static_cast<double>(s) * cfg.dt);
    const std::size_t nt = times.size();

    std::size_t substeps = 1;
    if (cfg.scheme == Scheme::penalized && !domain->is_whole_space())
        substeps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.dt * cfg.penalization_n / 0.1 - 1e-12)));

    const std::size_t nb = cfg.n_batches;
    std::vector<BatchSums> batches(nb);
    const NormalSource rng(cfg.seed);
    const double sqdt = std::sqrt(cfg.dt);

    parallel_for_paths(nb, cfg.n_threads, [&](std::size_t b0, std::size_t b1) {
        Stepper sx(model, domain, cfg.scheme, cfg.penalization_n);
        Stepper sy(model, domain, cfg.scheme, cfg.penalization_n);
        Point vx(d), vy(d), dw(d);
        std::vector<double> sub(substeps * d);
        for (std::size_t b = b0; b < b1; ++b) {
            BatchSums& acc = batches[b];
            acc.sum.assign(nf * nt, 0.0);
            acc.sumsq.assign(nf * nt, 0.0);
            const std::size_t p0 = b * cfg.n_paths / nb, p1 = (b + 1) * cfg.n_paths / nb;
            for (std::size_t p = p0; p < p1; ++p) {
                vx = x;
                vy = y;
                auto record = [&](std::size_t k) {
                    for (std::size_t f = 0; f < nf; ++f) {
                        const double diff = test_functions[f].phi(vx) - test_functions[f].phi(vy);
                        acc.sum[f * nt + k] += diff;
                        acc.sumsq[f * nt + k] += diff * diff;
                    }
                };
                record(0);
                std::size_t k = 1;
                for (std::size_t s = 0; s < n_steps; ++s) {
                    rng.fill(p, s, 0, dw);
                    for (double& v : dw) v *= sqdt;
                    if (substeps > 1) {
                        bridge_increments(rng, p, s, substeps, cfg.dt, dw, sub);
                        const double h = cfg.dt / static_cast<double>(substeps);
                        for (std::size_t j = 0; j < substeps; ++j) {
                            std::span<const double> inc(sub.data() + j * d, d);
                            sx.step(vx, inc, h);
                            sy.step(vy, inc, h);
                        }
                    } else {
                        sx.step(vx, dw, cfg.dt);
                        sy.step(vy, dw, cfg.dt);
                    }
                    for (std::size_t i = 0; i < d; ++i)
                        if (!std::isfinite(vx[i]) || !std::isfinite(vy[i])) throw NonFiniteStateError(p, s);
                    if ((s + 1) % cfg.record_stride == 0 || s + 1 == n_steps) record(k++);
                }
            }
        }
    });

    std::vector<std::size_t> batch_count(nb);
    for (std::size_t b = 0; b < nb; ++b) batch_count[b] = (b + 1) * cfg.n_paths / nb - b * cfg.n_paths / nb;
    const double N = static_cast<double>(cfg.n_paths);

    std::vector<MixingReport> reports;
    for (std::size_t f = 0; f < nf; ++f) {
        MixingReport rep;
        rep.test_function_id = test_functions[f].id;
        rep.x = x;
        rep.y = y;
        rep.times = times;
        rep.gap.resize(nt);
        rep.std_error.resize(nt);
        std::vector<double> total(nt, 0.0);
        for (std::size_t k = 0; k < nt; ++k) {
            double s = 0.0, sq = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                s += batches[b].sum[f * nt + k];
                sq += batches[b].sumsq[f * nt + k];
            }
            total[k] = s;
            const double mean = s / N;
            const double var = std::max(0.0, (sq - N * mean * mean) / (N - 1.0));
            rep.gap[k] = std::abs(mean);
            rep.std_error[k] = std::sqrt(var / N);
        }

        // Contiguous window from the first positive time while the gap stays resolved.
        std::vector<std::size_t> window;
        for (std::size_t k = 1; k < nt; ++k) {
            if (!(rep.gap[k] > cfg.snr_threshold * rep.std_error[k])) break;
            window.push_back(k);
        }
        rep.fit_points = window.size();
        if (window.size() >= 3) {
            rep.fit_window_start = times[window.front()];
            rep.fit_window_end = times[window.back()];
            rep.fitted_rate_mu = fit_rate(times, rep.gap, window, &rep.log_prefactor);
            std::vector<double> jack;
            std::vector<double> g(nt);
            for (std::size_t b = 0; b < nb; ++b) {
                const double n_minus = N - static_cast<double>(batch_count[b]);
                for (std::size_t k : window) g[k] = std::abs((total[k] - batches[b].sum[f * nt + k]) / n_minus);
                const double mu_b = fit_rate(times, g, window);
                if (std::isfinite(mu_b)) jack.push_back(mu_b);
            }
            if (jack.size() >= 2 && std::isfinite(rep.fitted_rate_mu)) {
                double mean = 0.0;
                for (double v : jack) mean += v;
                mean /= static_cast<double>(jack.size());
                double ss = 0.0;
                for (double v : jack) ss += (v - mean) * (v - mean);
                const double m = static_cast<double>(jack.size());
                const double se = std::sqrt((m - 1.0) / m * ss);
                rep.mu_ci_low = rep.fitted_rate_mu - 1.96 * se;
                rep.mu_ci_high = rep.fitted_rate_mu + 1.96 * se;
                rep.conclusive = true;
            }
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

JointDecayFit joint_decay_fit(const std::vector<MixingReport>& reports, const std::vector<TestFunction>& battery) {
    JointDecayFit fit;
    fit.mu = std::numeric_limits<double>::infinity();
    for (const auto& r : reports)
        if (r.conclusive) {
            fit.mu = std::min(fit.mu, r.fitted_rate_mu);
            ++fit.reports_used;
        }
    if (fit.reports_used == 0) {
        fit.mu = 0.0;
        return fit;
    }
    auto sup_norm = [&](const std::string& id) {
        for (const auto& tf : battery)
            if (tf.id == id) return tf.sup_norm;
        return 1.0;
    };
    for (const auto& r : reports) {
        const double norm = (1.0 + norm2(r.x) + norm2(r.y)) * sup_norm(r.test_function_id);
        const double half = 0.5 * r.times.back();
        for (std::size_t k = 0; k < r.times.size(); ++k)
            if (r.times[k] <= half) fit.C = std::max(fit.C, r.gap[k] / norm * std::exp(fit.mu * r.times[k]));
    }
    for (const auto& r : reports) {
        const double norm = (1.0 + norm2(r.x) + norm2(r.y)) * sup_norm(r.test_function_id);
        const double half = 0.5 * r.times.back();
        for (std::size_t k = 0; k < r.times.size(); ++k) {
            if (r.times[k] <= half) continue;
            const double lower = std::max(0.0, r.gap[k] - 3.0 * r.std_error[k]);
            if (fit.C > 0.0) fit.worst_excess = std::max(fit.worst_excess, lower / norm * std::exp(fit.mu * r.times[k]) / fit.C);
        }
    }
    fit.holds = fit.C > 0.0 && fit.worst_excess <= 1.0;
    return fit;
}

}  // namespace ergolab
