#include "ergolab/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "ergolab/rng.hpp"
#include "ergolab/sde_sim.hpp"
#include "ergolab/stats.hpp"

namespace ergolab {

namespace {

double hamiltonian_at(const ControlSpec& ctrl, std::span<const double> x, std::span<const double> z,
                      std::span<const double> u, std::span<double> r) {
    ctrl.R(u, r);
    return ctrl.L(x, u) + dot(z, r);
}

void check_control(const ControlSpec& ctrl) {
    if (!ctrl.R || !ctrl.L) throw std::invalid_argument("control: R and L are required");
    if (ctrl.is_finite()) return;
    if (ctrl.box_lo.empty() || ctrl.box_lo.size() != ctrl.box_hi.size())
        throw std::invalid_argument("control: empty control set");
    for (std::size_t i = 0; i < ctrl.box_lo.size(); ++i)
        if (!(ctrl.box_lo[i] <= ctrl.box_hi[i])) throw std::invalid_argument("control: box requires lo <= hi");
    if (ctrl.box_grid < 2) throw std::invalid_argument("control: box_grid must be >= 2");
}

}  // namespace

HamiltonianMin minimize_hamiltonian(const ControlSpec& ctrl, std::span<const double> x, std::span<const double> z) {
    check_control(ctrl);
    Point r(ctrl.state_dim);
    HamiltonianMin best;
    best.value = std::numeric_limits<double>::infinity();
    if (ctrl.is_finite()) {
        for (const Point& u : ctrl.finite_set) {
            const double v = hamiltonian_at(ctrl, x, z, u, r);
            if (v < best.value) {
                best.value = v;
                best.u = u;
            }
        }
        return best;
    }

    const std::size_t m = ctrl.box_lo.size();
    Point lo = ctrl.box_lo, hi = ctrl.box_hi, u(m);
    std::size_t per_axis = ctrl.box_grid;
    for (int round = 0; round < 40; ++round) {
        const Point prev = best.u;
        std::size_t total = 1;
        for (std::size_t i = 0; i < m; ++i) total *= per_axis;
        for (std::size_t flat = 0; flat < total; ++flat) {
            // Mixed-radix decode, first axis most significant: lexicographic order.
            std::size_t rest = flat;
            for (std::size_t i = m; i-- > 0;) {
                const std::size_t k = rest % per_axis;
                rest /= per_axis;
                u[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
            }
            const double v = hamiltonian_at(ctrl, x, z, u, r);
            if (v < best.value) {
                best.value = v;
                best.u = u;
            }
        }
        // Zoom on the incumbent: two grid spacings either side, clipped to U.
        double width = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double step = (hi[i] - lo[i]) / static_cast<double>(per_axis - 1);
            lo[i] = std::max(ctrl.box_lo[i], best.u[i] - 2.0 * step);
            hi[i] = std::min(ctrl.box_hi[i], best.u[i] + 2.0 * step);
            width = std::max(width, hi[i] - lo[i]);
        }
        per_axis = 9;
        if (width < 1e-12 || (round > 0 && prev == best.u && width < 1e-9)) break;
    }
    return best;
}

Hamiltonian build_hamiltonian(const ControlSpec& ctrl) {
    check_control(ctrl);
    Hamiltonian h;
    h.driver.name = "hamiltonian(" + ctrl.name + ")";
    h.driver.M_psi = std::max(ctrl.M_L, ctrl.M_R);
    // psi ignores z only when R vanishes on the control set.
    bool r_zero = true;
    Point r(ctrl.state_dim);
    auto probe = [&](const Point& u) {
        ctrl.R(u, r);
        for (double v : r)
            if (v != 0.0) r_zero = false;
    };
    if (ctrl.is_finite()) {
        for (const Point& u : ctrl.finite_set) probe(u);
    } else {
        probe(ctrl.box_lo);
        probe(ctrl.box_hi);
        Point mid(ctrl.box_lo.size());
        for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (ctrl.box_lo[i] + ctrl.box_hi[i]);
        probe(mid);
    }
    h.driver.depends_on_z = !r_zero;
    h.driver.psi = [ctrl](std::span<const double> x, std::span<const double> z) {
        return minimize_hamiltonian(ctrl, x, z).value;
    };
    if (ctrl.is_finite()) {
        h.driver.bind_states = [ctrl](std::span<const double> states, std::size_t dim) -> DriverSpec::BoundDriver {
            const std::size_t n = states.size() / dim, nu = ctrl.finite_set.size();
            auto table = std::make_shared<std::vector<double>>(n * nu);
            auto rtab = std::make_shared<std::vector<double>>(nu * ctrl.state_dim);
            for (std::size_t a = 0; a < nu; ++a)
                ctrl.R(ctrl.finite_set[a], std::span<double>(rtab->data() + a * ctrl.state_dim, ctrl.state_dim));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t a = 0; a < nu; ++a)
                    (*table)[i * nu + a] = ctrl.L(states.subspan(i * dim, dim), ctrl.finite_set[a]);
            const std::size_t sd = ctrl.state_dim;
            return [table, rtab, nu, sd](std::size_t i, std::span<const double> z) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < nu; ++a) {
                    double v = (*table)[i * nu + a];
                    for (std::size_t j = 0; j < sd; ++j) v += z[j] * (*rtab)[a * sd + j];
                    if (v < best) best = v;
                }
                return best;
            };
        };
    }
    h.policy.description = "argmin(" + ctrl.name + ")";
    h.policy.gamma = [ctrl](std::span<const double> x, std::span<const double> z) {
        return minimize_hamiltonian(ctrl, x, z).u;
    };
    return h;
}

ControlPolicy constant_policy(const Point& u) {
    ControlPolicy p;
    p.description = "constant(";
    for (std::size_t i = 0; i < u.size(); ++i) p.description += (i ? "," : "") + std::to_string(u[i]);
    p.description += ")";
    p.rho = [u](double, std::span<const double>, std::span<double> out) { std::copy(u.begin(), u.end(), out.begin()); };
    return p;
}

ControlPolicy optimal_policy(const ControlSpec& ctrl, const ErgodicSolution& sol) {
    ControlPolicy p;
    p.description = "optimal feedback";
    p.rho = [ctrl, &sol](double, std::span<const double> x, std::span<double> out) {
        const Point z = evaluate_vbar_z(sol, x);
        const Point u = minimize_hamiltonian(ctrl, x, z).u;
        std::copy(u.begin(), u.end(), out.begin());
    };
    return p;
}

ControlPolicy callable_policy(std::string description,
                              std::function<void(double t, std::span<const double> x, std::span<double> u)> rho) {
    return ControlPolicy{std::move(description), std::move(rho)};
}

namespace {

struct ControlledRun {
    const ModelSpec& model;
    const ConvexDomain* domain;
    const ControlSpec& ctrl;
    const ControlPolicy& policy;
    const CostConfig& cfg;

    void validate() const {
        check_control(ctrl);
        if (!policy.rho) throw std::invalid_argument("ergodic_cost: policy has no rho");
        if (!(cfg.dt > 0.0) || !(cfg.horizon_T > cfg.dt) || cfg.n_paths < 2)
            throw std::invalid_argument("ergodic_cost: invalid time grid or path count");
        if (!(cfg.burn_in_fraction >= 0.0 && cfg.burn_in_fraction < 1.0))
            throw std::invalid_argument("ergodic_cost: burn_in_fraction must lie in [0, 1)");
        if (ctrl.state_dim != model.dim) throw std::invalid_argument("ergodic_cost: control state_dim mismatch");
    }

    /// girsanov = false: controlled dynamics. true: reference dynamics with density weight.
    CostEstimate run(bool girsanov, const Point& x0) const {
        validate();
        const std::size_t d = model.dim;
        const bool reflect = domain && !domain->is_whole_space();
        const std::size_t n_steps = static_cast<std::size_t>(std::llround(cfg.horizon_T / cfg.dt));
        const std::size_t first = static_cast<std::size_t>(std::floor(cfg.burn_in_fraction * static_cast<double>(n_steps)));
        const double avg_len = static_cast<double>(n_steps - first) * cfg.dt;
        const NormalSource rng(derive_seed(cfg.seed, "control"));
        const double sqdt = std::sqrt(cfg.dt);
        const std::size_t m = ctrl.is_finite() ? ctrl.finite_set.front().size() : ctrl.box_lo.size();

        std::vector<double> per_path(cfg.n_paths);
        parallel_for_paths(cfg.n_paths, cfg.n_threads, [&](std::size_t b, std::size_t e) {
            Stepper stepper(model, reflect ? domain : nullptr, reflect ? Scheme::projected : Scheme::unreflected);
            Point x(d), dw(d), u(m), r(d), extra(d), sig(d * d);
            for (std::size_t p = b; p < e; ++p) {
                x = x0;
                double cost = 0.0, log_w = 0.0;
                for (std::size_t k = 0; k < n_steps; ++k) {
                    const double t = static_cast<double>(k) * cfg.dt;
                    policy.rho(t, x, u);
                    ctrl.R(u, r);
                    if (k >= first) cost += ctrl.L(x, u) * cfg.dt;
                    rng.fill(p, k, 0, dw);
                    for (double& v : dw) v *= sqdt;
                    if (girsanov) {
                        log_w += dot(r, dw) - 0.5 * norm2(r) * cfg.dt;
                        stepper.step(x, dw, cfg.dt);
                    } else {
                        model.diffusion(x, sig);
                        for (std::size_t i = 0; i < d; ++i) {
                            extra[i] = 0.0;
                            for (std::size_t j = 0; j < d; ++j) extra[i] += sig[i * d + j] * r[j];
                        }
                        stepper.step(x, dw, cfg.dt, extra);
                    }
                    for (double v : x)
                        if (!std::isfinite(v)) throw NonFiniteStateError(p, k);
                }
                const double avg = cost / avg_len;
                if (!std::isfinite(avg) || !std::isfinite(log_w))
                    throw NumericalError("ergodic_cost: non-finite cost on path " + std::to_string(p));
                per_path[p] = girsanov ? std::exp(log_w) * avg : avg;
            }
        });
        const MeanEstimate est = mean_and_stderr(per_path);
        return {est.mean, est.std_error};
    }
};

Point start_of(const ModelSpec& model, const ConvexDomain* domain, const CostConfig& cfg) {
    if (cfg.x0.empty()) return reference_point(domain, model.dim);
    if (cfg.x0.size() != model.dim) throw std::invalid_argument("ergodic_cost: x0 dimension mismatch");
    if (domain && !domain->contains(cfg.x0, 1e-12)) throw std::invalid_argument("ergodic_cost: x0 outside the domain");
    return cfg.x0;
}

}  // namespace

CostEstimate ergodic_cost(const ModelSpec& model, const ConvexDomain* domain, const ControlSpec& ctrl,
                          const ControlPolicy& policy, const CostConfig& cfg) {
    return ControlledRun{model, domain, ctrl, policy, cfg}.run(false, start_of(model, domain, cfg));
}

CostEstimate girsanov_cost(const ModelSpec& model, const ConvexDomain* domain, const ControlSpec& ctrl,
                           const ControlPolicy& policy, const CostConfig& cfg) {
    return ControlledRun{model, domain, ctrl, policy, cfg}.run(true, start_of(model, domain, cfg));
}

}  // namespace ergolab
