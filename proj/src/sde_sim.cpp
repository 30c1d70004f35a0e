#include "ergolab/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "ergolab/stats.hpp"

namespace ergolab {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::unreflected: return "unreflected";
        case Scheme::penalized: return "penalized";
        case Scheme::projected: return "projected";
    }
    return "unknown";
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
    if (!(dt < horizon_T)) throw std::invalid_argument("SimConfig: dt must be smaller than horizon_T");
    if (n_paths == 0) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
    if (record_stride == 0) throw std::invalid_argument("SimConfig: record_stride must be >= 1");
    if (scheme == Scheme::penalized && !(penalization_n >= 1.0))
        throw std::invalid_argument("SimConfig: penalization n must be >= 1");
}

std::size_t SimConfig::n_steps() const {
    return static_cast<std::size_t>(std::llround(horizon_T / dt));
}

void parallel_for_paths(std::size_t n, std::size_t n_threads,
                        const std::function<void(std::size_t, std::size_t)>& fn) {
    std::size_t threads = n_threads ? n_threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(1, n));
    if (threads <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
        pool.emplace_back([&, b, e, t] {
            try {
                if (b < e) fn(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

Stepper::Stepper(const ModelSpec& model, const ConvexDomain* domain, Scheme scheme, double penalization_n)
    : model_(model),
      domain_(domain),
      scheme_(scheme),
      n_(penalization_n),
      tamed_(model.poly_growth_nu > 1.0),
      f_(model.dim),
      tmp_(model.dim),
      sig_(model.dim * model.dim),
      proj_(model.dim) {
    if (scheme != Scheme::unreflected) {
        if (!domain) throw std::invalid_argument("Stepper: reflected and penalized schemes need a domain");
        if (domain->dim() != model.dim) throw std::invalid_argument("Stepper: domain dimension mismatch");
    }
}

double Stepper::step(std::span<double> x, std::span<const double> dw, double h, std::span<const double> extra_drift) {
    const std::size_t d = model_.dim;
    model_.drift(x, f_);
    if (scheme_ == Scheme::penalized) {
        beta(*domain_, x, tmp_);
        for (std::size_t i = 0; i < d; ++i) f_[i] -= 2.0 * n_ * tmp_[i];
    }
    if (!extra_drift.empty())
        for (std::size_t i = 0; i < d; ++i) f_[i] += extra_drift[i];

    double scale = h;
    if (tamed_) scale = h / (1.0 + h * std::sqrt(norm2(f_)));

    model_.diffusion(x, sig_);
    for (std::size_t i = 0; i < d; ++i) {
        double noise = 0.0;
        for (std::size_t j = 0; j < d; ++j) noise += sig_[i * d + j] * dw[j];
        tmp_[i] = x[i] + scale * f_[i] + noise;
    }
    if (scheme_ != Scheme::projected) {
        std::copy(tmp_.begin(), tmp_.end(), x.begin());
        return 0.0;
    }
    domain_->project(tmp_, proj_);
    double dk = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        dk += (tmp_[i] - proj_[i]) * (tmp_[i] - proj_[i]);
        x[i] = proj_[i];
    }
    return std::sqrt(dk);
}

void bridge_increments(const NormalSource& rng, std::uint64_t path, std::uint64_t step, std::size_t m, double h,
                       std::span<const double> total, std::span<double> out) {
    const std::size_t d = total.size();
    const double hs = h / static_cast<double>(m);
    std::vector<double> remaining(total.begin(), total.end()), z(d);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double r = static_cast<double>(m - j);
        rng.fill(path, step, static_cast<std::uint32_t>(j + 1), z);
        const double sd = std::sqrt(hs * (r - 1.0) / r);
        for (std::size_t i = 0; i < d; ++i) {
            const double inc = remaining[i] / r + sd * z[i];
            out[j * d + i] = inc;
            remaining[i] -= inc;
        }
    }
    for (std::size_t i = 0; i < d; ++i) out[(m - 1) * d + i] = remaining[i];
}

namespace {

PathBundle run_simulation(const ModelSpec& model, const ConvexDomain* domain, const Point& x0, const SimConfig& cfg) {
    cfg.validate();
    if (x0.size() != model.dim) throw std::invalid_argument("simulate: x0 dimension mismatch");
    if (cfg.scheme != Scheme::unreflected && domain && !domain->contains(x0, 1e-12))
        throw std::invalid_argument("simulate: x0 must lie in the closure of the domain");

    const std::size_t d = model.dim;
    const std::size_t n_steps = cfg.n_steps();
    const std::size_t stride = cfg.record_stride;

    PathBundle out;
    out.dim = d;
    out.n_paths = cfg.n_paths;
    out.scheme = cfg.scheme;
    out.dt = cfg.dt;
    out.record_stride = stride;
    out.times.push_back(0.0);
    for (std::size_t s = 1; s <= n_steps; ++s)
        if (s % stride == 0 || s == n_steps) out.times.push_back(static_cast<double>(s) * cfg.dt);
    const std::size_t nt = out.times.size();
    out.states.assign(cfg.n_paths * nt * d, 0.0);
    const bool projected = cfg.scheme == Scheme::projected;
    if (projected) {
        out.local_time.assign(cfg.n_paths * nt, 0.0);
        out.contacts.assign(cfg.n_paths * nt, 0);
    }
    if (cfg.keep_increments) out.increments.assign(cfg.n_paths * (nt - 1) * d, 0.0);

    std::size_t substeps = 1;
    if (cfg.scheme == Scheme::penalized && domain && !domain->is_whole_space())
        substeps = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(cfg.dt * cfg.penalization_n / cfg.stiff_factor - 1e-12)));

    const NormalSource rng(cfg.seed);
    const double sqdt = std::sqrt(cfg.dt);

    parallel_for_paths(cfg.n_paths, cfg.n_threads, [&](std::size_t begin, std::size_t end) {
        Stepper stepper(model, domain, cfg.scheme, cfg.penalization_n);
        Point x(d), z(d), dw(d), acc(d);
        std::vector<double> sub(substeps * d);
        for (std::size_t p = begin; p < end; ++p) {
            x = x0;
            std::copy(x.begin(), x.end(), out.states.begin() + p * nt * d);
            std::fill(acc.begin(), acc.end(), 0.0);
            double K = 0.0;
            std::uint32_t contacts = 0;
            std::size_t k = 1;
            for (std::size_t s = 0; s < n_steps; ++s) {
                rng.fill(p, s, 0, z);
                for (std::size_t i = 0; i < d; ++i) dw[i] = sqdt * z[i];
                if (substeps > 1) {
                    bridge_increments(rng, p, s, substeps, cfg.dt, dw, sub);
                    const double h = cfg.dt / static_cast<double>(substeps);
                    for (std::size_t j = 0; j < substeps; ++j)
                        stepper.step(x, std::span<const double>(sub.data() + j * d, d), h);
                } else {
                    const double dk = stepper.step(x, dw, cfg.dt);
                    if (dk > 0.0) {
                        K += dk;
                        ++contacts;
                    }
                }
                for (std::size_t i = 0; i < d; ++i) {
                    if (!std::isfinite(x[i])) throw NonFiniteStateError(p, s);
                    acc[i] += dw[i];
                }
                if ((s + 1) % stride == 0 || s + 1 == n_steps) {
                    std::copy(x.begin(), x.end(), out.states.begin() + (p * nt + k) * d);
                    if (projected) {
                        out.local_time[p * nt + k] = K;
                        out.contacts[p * nt + k] = contacts;
                        contacts = 0;
                    }
                    if (cfg.keep_increments) {
                        std::copy(acc.begin(), acc.end(), out.increments.begin() + (p * (nt - 1) + k - 1) * d);
                        std::fill(acc.begin(), acc.end(), 0.0);
                    }
                    ++k;
                }
            }
        }
    });
    return out;
}

}  // namespace

PathBundle simulate_unreflected(const ModelSpec& model, const Point& x0, const SimConfig& cfg) {
    SimConfig c = cfg;
    c.scheme = Scheme::unreflected;
    return run_simulation(model, nullptr, x0, c);
}

PathBundle simulate_penalized(const ModelSpec& model, const ConvexDomain& domain, double n, const Point& x0,
                              const SimConfig& cfg) {
    SimConfig c = cfg;
    c.scheme = Scheme::penalized;
    c.penalization_n = n;
    return run_simulation(model, &domain, x0, c);
}

PathBundle simulate_reflected(const ModelSpec& model, const ConvexDomain& domain, const Point& x0,
                              const SimConfig& cfg) {
    SimConfig c = cfg;
    c.scheme = Scheme::projected;
    return run_simulation(model, &domain, x0, c);
}

PathBundle simulate(const ModelSpec& model, const ConvexDomain* domain, const Point& x0, const SimConfig& cfg) {
    switch (cfg.scheme) {
        case Scheme::unreflected: return simulate_unreflected(model, x0, cfg);
        case Scheme::penalized:
            if (!domain) throw std::invalid_argument("simulate: penalized scheme needs a domain");
            return simulate_penalized(model, *domain, cfg.penalization_n, x0, cfg);
        case Scheme::projected:
            if (!domain) throw std::invalid_argument("simulate: projected scheme needs a domain");
            return simulate_reflected(model, *domain, x0, cfg);
    }
    throw std::invalid_argument("simulate: unknown scheme");
}

std::vector<MomentRow> estimate_moments(const PathBundle& bundle, const std::vector<double>& powers) {
    if (bundle.n_paths == 0 || bundle.n_times() == 0) throw std::invalid_argument("estimate_moments: empty bundle");
    std::vector<MomentRow> rows;
    rows.reserve(bundle.n_times() * powers.size());
    for (std::size_t k = 0; k < bundle.n_times(); ++k) {
        for (double p : powers) {
            RunningStats rs;
            for (std::size_t path = 0; path < bundle.n_paths; ++path)
                rs.add(std::pow(std::sqrt(norm2(bundle.state(path, k))), p));
            MomentRow row{bundle.times[k], p, rs.mean(), rs.stderr_of_mean(), true};
            row.finite = std::isfinite(row.estimate) && std::isfinite(row.std_error);
            rows.push_back(row);
        }
    }
    return rows;
}

TestProcess constant_process(const Point& z) {
    return [z](std::size_t, std::size_t, double, std::span<double> out) { std::copy(z.begin(), z.end(), out.begin()); };
}

double check_variational_inequality(const PathBundle& bundle, const ConvexDomain& domain, const TestProcess& z) {
    if (!bundle.has_local_time()) throw std::invalid_argument("check_variational_inequality: bundle has no local time");
    const std::size_t d = bundle.dim;
    Point zt(d), g(d);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        double sum = 0.0;
        for (std::size_t k = 1; k < bundle.n_times(); ++k) {
            const double dk = bundle.K(p, k) - bundle.K(p, k - 1);
            if (dk == 0.0) continue;
            const auto x = bundle.state(p, k);
            z(p, k, bundle.times[k], zt);
            domain.grad_phi(x, g);
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += (x[i] - zt[i]) * g[i];
            sum += s * dk;
        }
        worst = std::max(worst, sum);
    }
    return worst;
}

PenalizationStudy penalization_study(const ModelSpec& model, const ConvexDomain& domain, const Point& x0,
                                     const std::vector<double>& n_values, double dt, double horizon,
                                     std::size_t n_paths, std::uint64_t seed, double p) {
    if (n_values.size() < 2) throw std::invalid_argument("penalization_study: need >= 2 values of n");
    const std::size_t d = model.dim;
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    const NormalSource rng(seed);
    const double sqdt = std::sqrt(dt);

    // Same stiffness rule as simulate_penalized: substeps of length <= 0.1 / n on bridged increments.
    std::vector<std::size_t> substeps;
    for (double n : n_values)
        substeps.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt * n / SimConfig{}.stiff_factor - 1e-12))));
    std::vector<double> sup_pow(n_values.size() * n_paths, 0.0);
    parallel_for_paths(n_paths, 0, [&](std::size_t begin, std::size_t end) {
        Stepper projected(model, &domain, Scheme::projected);
        std::vector<Stepper> penalized;
        for (double n : n_values) penalized.emplace_back(model, &domain, Scheme::penalized, n);
        std::vector<double> dw(n_steps * d), ref((n_steps + 1) * d);
        std::vector<std::vector<double>> sub;
        for (std::size_t m : substeps) sub.emplace_back(m * d);
        Point x(d);
        for (std::size_t path = begin; path < end; ++path) {
            for (std::size_t s = 0; s < n_steps; ++s) {
                std::span<double> slot(dw.data() + s * d, d);
                rng.fill(path, s, 0, slot);
                for (double& v : slot) v *= sqdt;
            }
            x = x0;
            std::copy(x.begin(), x.end(), ref.begin());
            for (std::size_t s = 0; s < n_steps; ++s) {
                projected.step(x, std::span<const double>(dw.data() + s * d, d), dt);
                std::copy(x.begin(), x.end(), ref.begin() + (s + 1) * d);
            }
            for (std::size_t j = 0; j < n_values.size(); ++j) {
                x = x0;
                double worst = 0.0;
                const std::size_t m = substeps[j];
                const double h = dt / static_cast<double>(m);
                for (std::size_t s = 0; s < n_steps; ++s) {
                    const std::span<const double> coarse(dw.data() + s * d, d);
                    if (m > 1) {
                        bridge_increments(rng, path, s, m, dt, coarse, sub[j]);
                        for (std::size_t q = 0; q < m; ++q)
                            penalized[j].step(x, std::span<const double>(sub[j].data() + q * d, d), h);
                    } else {
                        penalized[j].step(x, coarse, dt);
                    }
                    double e = 0.0;
                    for (std::size_t i = 0; i < d; ++i) e += (x[i] - ref[(s + 1) * d + i]) * (x[i] - ref[(s + 1) * d + i]);
                    worst = std::max(worst, e);
                    if (!std::isfinite(e)) throw NonFiniteStateError(path, s);
                }
                sup_pow[j * n_paths + path] = std::pow(worst, 0.5 * p);
            }
        }
    });

    PenalizationStudy study;
    study.p = p;
    std::vector<double> ns, ms;
    for (std::size_t j = 0; j < n_values.size(); ++j) {
        const auto est = mean_and_stderr(std::span<const double>(sup_pow.data() + j * n_paths, n_paths));
        study.rows.push_back({n_values[j], est.mean, est.std_error});
        ns.push_back(n_values[j]);
        ms.push_back(est.mean);
    }
    const LineFit fit = fit_loglog(ns, ms);
    study.loglog_slope = fit.slope;
    study.slope_stderr = fit.slope_stderr;
    return study;
}

}  // namespace ergolab
