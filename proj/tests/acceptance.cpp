// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ergolab/catalog.hpp"
#include "ergolab/control.hpp"
#include "ergolab/ergodic.hpp"
#include "ergolab/mixing.hpp"
#include "ergolab/pde_oracle.hpp"
#include "ergolab/rng.hpp"
#include "ergolab/sde_sim.hpp"
#include "ergolab/stats.hpp"

using namespace ergolab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Timer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr std::uint64_t kSeed = 20240601;

// ---------------------------------------------------------------------------
// Reflected OU on [-1, 1] with the cosine control cost; shared by several criteria.

struct ReflectedOuCosine {
    ModelSpec model = make_model_preset("linear_ou");
    ConvexDomain domain = make_domain_preset("box", 1);
    ControlSpec control = make_control_preset("cosine_cost", 1);
    Hamiltonian ham = build_hamiltonian(control);
    VanishingDiscountConfig vd;
    ErgodicSolution sol;
    double lambda_pde = 0.0;

    ReflectedOuCosine() {
        vd.alphas = {0.2, 0.1, 0.05, 0.02, 0.01};
        vd.bsde.dt = 1e-2;
        vd.bsde.cloud_size = 5000;
        vd.bsde.degree = 6;
        vd.bsde.seed = kSeed;
        sol = vanishing_discount(model, &domain, ham.driver, vd);
        lambda_pde =
            solve_ergodic_pde(grid_problem_from_model(model, ham.driver, -1.0, 1.0, 400, PdeMode::ergodic)).lambda;
    }
};

const ReflectedOuCosine& reference() {
    static const ReflectedOuCosine r;
    return r;
}

// ---------------------------------------------------------------------------

Outcome moment_decay() {
    Timer timer;
    const ModelSpec m = make_model_preset("linear_ou");
    const double x0 = 1.0;
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon_T = 2.0;
    cfg.n_paths = 100000;
    cfg.seed = derive_seed(kSeed, "moments");
    cfg.record_stride = 500;
    const PathBundle b = simulate_unreflected(m, {x0}, cfg);
    const auto rows = estimate_moments(b, {2.0});
    bool pass = true;
    std::ostringstream os;
    for (const auto& r : rows) {
        if (!(std::abs(r.t - 0.5) < 1e-9 || std::abs(r.t - 1.0) < 1e-9 || std::abs(r.t - 2.0) < 1e-9)) continue;
        const double exact = x0 * x0 * std::exp(-2.0 * r.t) + 0.5 * (1.0 - std::exp(-2.0 * r.t));
        const double z = std::abs(r.estimate - exact) / r.std_error;
        pass = pass && z <= 3.0;
        os << fmt("t=%g est=%.5f exact=%.5f z=%.2f  ", r.t, r.estimate, exact, z);
    }
    const double sec = timer.seconds();
    pass = pass && sec < 60.0;
    os << fmt("time=%.1fs", sec);
    return {pass, os.str()};
}

Outcome penalization_rate() {
    Timer timer;
    // OU pushed against the boundary of the half line {x > 0}, started on it.
    ModelSpec m = make_model_preset("linear_ou");
    m.bounded_drift = [](std::span<const double>, std::span<double> o) { o[0] = -1.0; };
    m.b_bound = 1.0;
    const ConvexDomain half_line = make_half_space({1.0}, 0.0);
    std::vector<double> ns;
    for (int k = 4; k <= 12; ++k) ns.push_back(std::ldexp(1.0, k));
    const auto study = penalization_study(m, half_line, {0.0}, ns, 1e-4, 1.0, 10000, derive_seed(kSeed, "penalization"));
    const double sec = timer.seconds();
    return {study.loglog_slope <= -0.8 && sec < 300.0,
            fmt("slope=%.3f +- %.3f  E sup|X^n-X|^4: n=16 %.3e, n=4096 %.3e  time=%.1fs", study.loglog_slope,
                study.slope_stderr, study.rows.front().mean_sup_pow, study.rows.back().mean_sup_pow, sec)};
}

Outcome semigroup_decay() {
    Timer timer;
    MixingConfig cfg;
    cfg.dt = 1e-2;
    cfg.horizon_T = 5.0;
    cfg.n_paths = 20000;
    cfg.seed = derive_seed(kSeed, "mixing");
    const auto battery = default_test_battery(1);

    auto slowest = [](const std::vector<MixingReport>& reps) {
        const MixingReport* best = nullptr;
        for (const auto& r : reps)
            if (r.conclusive && (!best || r.fitted_rate_mu < best->fitted_rate_mu)) best = &r;
        return best;
    };
    const auto cubic = estimate_semigroup_gap(make_model_preset("cubic"), {0.0}, {1.0}, battery, cfg);
    const auto linear = estimate_semigroup_gap(make_model_preset("linear_ou"), {0.0}, {1.0}, battery, cfg);
    const MixingReport* c = slowest(cubic);
    const MixingReport* l = slowest(linear);
    const double sec = timer.seconds();
    if (!c || !l) return {false, "no conclusive decay fit"};
    bool cubic_ok = true;
    for (const auto& r : cubic)
        if (r.conclusive) cubic_ok = cubic_ok && r.fitted_rate_mu > 0.0 && r.mu_ci_low > 0.0;
    const bool pass = cubic_ok && l->fitted_rate_mu >= 0.8 && l->fitted_rate_mu <= 1.2 && sec < 120.0;
    return {pass, fmt("cubic mu=%.3f [%.3f, %.3f] (%s)  linear mu=%.3f [%.3f, %.3f] (%s)  time=%.1fs", c->fitted_rate_mu,
                      c->mu_ci_low, c->mu_ci_high, c->test_function_id.c_str(), l->fitted_rate_mu, l->mu_ci_low,
                      l->mu_ci_high, l->test_function_id.c_str(), sec)};
}

Outcome discounted_bound() {
    const auto& ref = reference();
    const RegressionCloud cloud = build_cloud(ref.model, &ref.domain, ref.vd.bsde);
    const Basis basis = make_basis(ref.vd.bsde, &ref.domain, cloud);
    bool pass = true;
    std::ostringstream os;
    for (double alpha : ref.vd.alphas) {
        const auto sol = solve_discounted(ref.model, &ref.domain, ref.ham.driver, alpha, ref.vd.bsde, cloud, basis);
        const double bound = ref.ham.driver.M_psi / alpha;
        double sup = sol.diagnostics.max_abs_value_on_cloud;
        for (int i = 0; i <= 400; ++i) sup = std::max(sup, std::abs(evaluate_value(sol, Point{-1.0 + i / 200.0}).value));
        pass = pass && sup <= bound + 1e-9 * bound;
        os << fmt("a=%g sup=%.4f bound=%.1f  ", alpha, sup, bound);
    }
    return {pass, os.str()};
}

Outcome increment_growth() {
    // Whole-space OU with a cosine driver: quadratic-growth weights matter off the box.
    const ModelSpec m = make_model_preset("linear_ou");
    const DriverSpec d = make_driver_preset("cosine");
    BsdeConfig cfg;
    cfg.dt = 1e-2;
    cfg.cloud_size = 5000;
    cfg.degree = 6;
    cfg.seed = kSeed;
    const RegressionCloud cloud = build_cloud(m, nullptr, cfg);
    const Basis basis = make_basis(cfg, nullptr, cloud);
    const NormalSource rng(derive_seed(kSeed, "growth-pairs"));
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; pairs.size() < 2000; ++i) {
        const double x = 0.8 * rng.normal(i, 0), y = 0.8 * rng.normal(i, 1);
        if (std::abs(x) <= 2.0 && std::abs(y) <= 2.0 && std::abs(x - y) > 1e-3) pairs.emplace_back(x, y);
    }
    auto max_ratio = [&](double alpha) {
        const auto sol = solve_discounted(m, nullptr, d, alpha, cfg, cloud, basis);
        double r = 0.0;
        for (const auto& [x, y] : pairs) {
            const double dv = evaluate_value(sol, Point{x}).value - evaluate_value(sol, Point{y}).value;
            r = std::max(r, std::abs(dv) / ((1.0 + x * x + y * y) * std::abs(x - y)));
        }
        return r;
    };
    const double C = max_ratio(0.1);
    bool pass = C > 0.0;
    std::ostringstream os;
    os << fmt("C(0.1)=%.4f  ", C);
    for (double alpha : {0.05, 0.02, 0.01}) {
        const double r = max_ratio(alpha);
        pass = pass && r <= 2.0 * C;
        os << fmt("a=%g max ratio=%.4f  ", alpha, r);
    }
    return {pass, os.str()};
}

Outcome ergodic_constant() {
    const auto& ref = reference();
    LongRunConfig lr;
    lr.dt = 1e-2;
    lr.horizon_T = 40.0;
    lr.n_paths = 500;
    lr.seed = kSeed;
    const auto long_run = check_lambda_uniqueness(ref.model, &ref.domain, ref.ham.driver, ref.sol, {{0.0}, {0.5}}, lr);
    const double lam_long = long_run.lambdas[0];
    const double gap_vd = std::abs(ref.sol.lambda - ref.lambda_pde);
    const double gap_long = std::abs(lam_long - ref.lambda_pde);

    const double c = 0.5;
    const DriverSpec cd = make_driver_preset("constant", {{"c", c}});
    VanishingDiscountConfig vd = ref.vd;
    vd.bsde.cloud_size = 2000;
    const auto csol = vanishing_discount(ref.model, &ref.domain, cd, vd);
    const double c_pde =
        solve_ergodic_pde(grid_problem_from_model(ref.model, cd, -1.0, 1.0, 200, PdeMode::ergodic)).lambda;
    lr.horizon_T = 10.0;
    lr.n_paths = 50;
    const double c_long = check_lambda_uniqueness(ref.model, &ref.domain, cd, csol, {{0.0}, {0.5}}, lr).lambdas[0];
    const double gap_c = std::max({std::abs(csol.lambda - c), std::abs(c_pde - c), std::abs(c_long - c)});

    const bool pass = gap_vd <= 2e-2 && gap_long <= 5e-2 && gap_c <= 1e-6;
    return {pass, fmt("lambda_vd=%.5f lambda_pde=%.5f (|diff|=%.2e)  lambda_long=%.5f (|diff|=%.2e)  constant: "
                      "max|lambda-c|=%.1e",
                      ref.sol.lambda, ref.lambda_pde, gap_vd, lam_long, gap_long, gap_c)};
}

Outcome lambda_uniqueness() {
    const auto& ref = reference();
    LongRunConfig lr;
    lr.dt = 1e-2;
    lr.horizon_T = 40.0;
    lr.n_paths = 500;
    lr.seed = derive_seed(kSeed, "uniqueness");
    const std::vector<Point> starts{{-0.9}, {-0.45}, {0.0}, {0.45}, {0.9}};
    const auto rep = check_lambda_uniqueness(ref.model, &ref.domain, ref.ham.driver, ref.sol, starts, lr);
    double mean = 0.0;
    for (double l : rep.lambdas) mean += l / static_cast<double>(rep.lambdas.size());
    const double rel = rep.max_spread / std::abs(mean);
    std::ostringstream os;
    for (std::size_t i = 0; i < starts.size(); ++i) os << fmt("x0=%g: %.4f  ", starts[i][0], rep.lambdas[i]);
    os << fmt("relative spread=%.2e", rel);
    return {rel <= 0.05, os.str()};
}

PathBundle residual_bundle(double dt) {
    const auto& ref = reference();
    SimConfig s;
    s.dt = dt;
    s.horizon_T = 5.0;
    s.n_paths = 200;
    s.seed = derive_seed(kSeed, "residual");
    s.scheme = Scheme::projected;
    s.keep_increments = true;
    return simulate_reflected(ref.model, ref.domain, {0.0}, s);
}

Outcome ebsde_residual_order() {
    const auto& ref = reference();
    const ZField z = z_field_of(ref.sol);
    std::vector<double> r;
    for (double dt : {1e-3, 5e-4}) {
        const PathBundle b = residual_bundle(dt);
        r.push_back(ebsde_residual(zero_neumann_values(ref.sol, b), z, ref.ham.driver, ref.sol.lambda, {}, 0.0, b)
                        .mean_abs_defect);
    }
    const double slope = std::log2(r[0] / r[1]);
    return {r[0] <= 1e-2 && std::abs(slope - 1.0) <= 0.3,
            fmt("mean |defect|: dt=1e-3 %.3e, dt=5e-4 %.3e, order=%.3f", r[0], r[1], slope)};
}

Outcome neumann_transforms() {
    const auto& ref = reference();
    const PathBundle b = residual_bundle(1e-3);
    const auto base = zero_neumann_values(ref.sol, b);
    const ScalarField flat = [](std::span<const double>) { return 0.7; };
    const bool identity = neumann_transform_fixed_mu(ref.sol, flat, 0.7, b).values == base.values;
    const ScalarField g = [](std::span<const double> x) { return 1.0 + 0.5 * x[0]; };
    const double mu = 0.3;
    const auto Yg = neumann_transform_fixed_mu(ref.sol, g, mu, b);
    const double res = ebsde_residual(Yg, z_field_of(ref.sol), ref.ham.driver, ref.sol.lambda, g, mu, b).mean_abs_defect;
    double max_k = 0.0;
    for (std::size_t p = 0; p < b.n_paths; ++p) max_k = std::max(max_k, b.K(p, b.n_times() - 1));
    return {identity && res <= 1e-2 && max_k > 0.0,
            fmt("g = mu identity: %s  generic g residual=%.3e  max K_T=%.3f", identity ? "exact" : "broken", res, max_k)};
}

Outcome pde_order() {
    constexpr double pi = std::numbers::pi;
    const double lambda0 = 0.7;
    std::vector<double> hs, errs;
    double worst_flux = 0.0, worst_lambda_ratio = 0.0;
    std::ostringstream os;
    for (std::size_t n : {50, 100, 200, 400, 800}) {
        GridProblem p;
        p.n_cells = n;
        p.f = [](double x) { return -x; };
        p.sigma = [](double) { return 1.0; };
        p.psi = [=](double x, double z) {
            const double vp = -pi * std::sin(pi * x), vpp = -pi * pi * std::cos(pi * x);
            return lambda0 - 0.5 * vpp + x * vp + 0.3 * std::abs(vp) - 0.3 * std::abs(z);
        };
        const auto s = solve_ergodic_pde(p);
        double e = 0.0;
        for (std::size_t i = 0; i < s.x.size(); ++i) e = std::max(e, std::abs(s.v[i] - (std::cos(pi * s.x[i]) - 1.0)));
        const double h = 2.0 / static_cast<double>(n);
        hs.push_back(h);
        errs.push_back(e);
        worst_flux = std::max({worst_flux, std::abs(s.flux_a), std::abs(s.flux_b)});
        worst_lambda_ratio = std::max(worst_lambda_ratio, std::abs(s.lambda - lambda0) / (h * h));
        os << fmt("n=%zu err=%.2e |dlambda|=%.1e  ", n, e, std::abs(s.lambda - lambda0));
    }
    const double slope = fit_loglog(hs, errs).slope;
    os << fmt("slope=%.3f  max flux=%.1e  max |dlambda|/h^2=%.3f", slope, worst_flux, worst_lambda_ratio);
    return {std::abs(slope - 2.0) <= 0.3 && worst_flux <= 1e-6 && worst_lambda_ratio <= 10.0, os.str()};
}

Outcome control_optimality() {
    const auto& ref = reference();
    CostConfig cc;
    cc.dt = 1e-2;
    cc.horizon_T = 40.0;
    cc.n_paths = 1000;
    cc.seed = derive_seed(kSeed, "control");
    cc.x0 = {0.0};
    const ControlPolicy opt = optimal_policy(ref.control, ref.sol);
    const auto I_opt = ergodic_cost(ref.model, &ref.domain, ref.control, opt, cc);
    bool pass = std::abs(I_opt.I - ref.sol.lambda) <= 5e-2;
    double worst_const = 1e9;
    for (const auto& u : ref.control.finite_set) {
        const auto I_u = ergodic_cost(ref.model, &ref.domain, ref.control, constant_policy(u), cc);
        worst_const = std::min(worst_const, I_u.I);
        pass = pass && I_u.I >= ref.sol.lambda - 5e-2;
    }
    CostConfig shortc = cc;
    shortc.horizon_T = 2.0;
    shortc.n_paths = 4000;
    const auto direct = ergodic_cost(ref.model, &ref.domain, ref.control, opt, shortc);
    const auto girsanov = girsanov_cost(ref.model, &ref.domain, ref.control, opt, shortc);
    const double se = std::hypot(direct.std_error, girsanov.std_error);
    const double z = std::abs(direct.I - girsanov.I) / se;
    pass = pass && z <= 3.0;
    return {pass, fmt("lambda=%.4f  I(optimal)=%.4f +- %.4f  min over %zu constants=%.4f  T=2 direct=%.4f girsanov=%.4f "
                      "(z=%.2f)",
                      ref.sol.lambda, I_opt.I, I_opt.std_error, ref.control.finite_set.size(), worst_const, direct.I,
                      girsanov.I, z)};
}

Outcome hypothesis_example() {
    const ModelSpec m = make_model_preset("paper_sigma");
    const auto rep = check_sigma_structure(m, ball_pair_sampler(1, derive_seed(kSeed, "model-check")), kDefaultCheckPairs);
    const bool pass = rep.pass && std::abs(rep.Lambda_est - 0.1) <= 1e-3 && rep.condition_value >= 1.97 - 1e-9 &&
                      rep.condition_value > 0.0;
    return {pass, fmt("Lambda=%.6f  condition=%.6f  |||sigma^-1|||^2=%.6f", rep.Lambda_est, rep.condition_value,
                      rep.inverse_norm_sq)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"moment decay", moment_decay},
        {"penalization rate", penalization_rate},
        {"semigroup decay", semigroup_decay},
        {"discounted bound", discounted_bound},
        {"increment-growth uniformity", increment_growth},
        {"ergodic constant agreement", ergodic_constant},
        {"lambda uniqueness", lambda_uniqueness},
        {"EBSDE residual", ebsde_residual_order},
        {"Neumann transforms", neumann_transforms},
        {"PDE oracle order", pde_order},
        {"control optimality", control_optimality},
        {"hypothesis checker example", hypothesis_example},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Timer t;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("criterion %2zu %-28s %s  (%.1fs)  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    t.seconds(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
