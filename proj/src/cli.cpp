#include "ergolab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "toml.hpp"

#include "ergolab/bsde.hpp"
#include "ergolab/control.hpp"
#include "ergolab/ergodic.hpp"
#include "ergolab/io.hpp"
#include "ergolab/mixing.hpp"
#include "ergolab/pde_oracle.hpp"
#include "ergolab/rng.hpp"
#include "ergolab/sde_sim.hpp"

namespace ergolab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class OutputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown after artifacts are written when a built-in check does not hold.
class CheckFailed : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Context {
    ExperimentConfig cfg;
    std::string subcommand;
    fs::path out;
    ModelSpec model;
    ConvexDomain domain = make_whole_space(1);
    std::optional<ControlSpec> control;
    DriverSpec driver;
    json artifacts = json::array();

    const ConvexDomain* dom() const { return domain.is_whole_space() ? nullptr : &domain; }

    void emit(const std::string& name, const std::string& text) {
        try {
            write_text(out / name, text);
        } catch (const std::exception& e) {
            throw OutputError(e.what());
        }
        artifacts.push_back({{"file", name}, {"fnv1a", fnv1a_hex(text)}});
    }
    void emit_csv(const std::string& name, const CsvWriter& w) { emit(name, w.str()); }
    void emit_json(const std::string& name, const json& j) { emit(name, j.dump(2) + "\n"); }

    BsdeConfig bsde_config() const {
        BsdeConfig b;
        b.dt = cfg.bsde.dt;
        b.cloud_size = cfg.bsde.cloud_size;
        b.burn_in = cfg.bsde.burn_in;
        b.basis = cfg.bsde.basis;
        b.degree = cfg.bsde.degree;
        b.trunc_tol_rel = cfg.bsde.trunc_tol_rel;
        b.seed = cfg.seed;
        b.n_threads = cfg.threads;
        return b;
    }
};

Context make_context(const ExperimentConfig& cfg, const std::string& sub, const fs::path& out) {
    Context ctx;
    ctx.cfg = cfg;
    ctx.subcommand = sub;
    ctx.out = out;
    ctx.model = make_model_preset(cfg.model, cfg.model_params);
    ctx.domain = make_domain_preset(cfg.domain, ctx.model.dim, cfg.domain_params);
    if (!cfg.control.empty()) {
        ctx.control = make_control_preset(cfg.control, ctx.model.dim, cfg.control_params);
        ctx.driver = build_hamiltonian(*ctx.control).driver;
    } else {
        ctx.driver = make_driver_preset(cfg.driver.empty() ? "cosine" : cfg.driver, cfg.driver_params);
    }
    return ctx;
}

/// Grid along the first axis through x_ref, spanning the regression hull.
CsvWriter value_profile(const DiscountedSolution& sol, const std::function<double(const Point&)>& v,
                        std::size_t n = 201) {
    CsvWriter w({"x", "v"});
    Point x = sol.x_ref;
    const double lo = sol.hull_lo[0], hi = sol.hull_hi[0];
    for (std::size_t i = 0; i < n; ++i) {
        x[0] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        w.add_row(std::vector<double>{x[0], v(x)});
    }
    return w;
}

// ---------------------------------------------------------------------------

int cmd_check_hypotheses(Context& ctx) {
    const auto sampler = ball_pair_sampler(ctx.model.dim, derive_seed(ctx.cfg.seed, "model-check"));
    const std::size_t n = ctx.cfg.check_pairs;
    const auto diss = check_dissipativity(ctx.model, sampler, n);
    const auto sig = check_sigma_structure(ctx.model, sampler, n);
    const auto drv = check_driver(ctx.driver, ctx.model.dim, sampler, n);

    json j;
    j["model"] = ctx.model.name;
    j["pairs"] = n;
    j["dissipativity"] = {{"pass", diss.pass}, {"eta", ctx.model.eta}, {"worst_ratio", diss.worst_ratio}};
    j["sigma_structure"] = {{"pass", sig.pass},
                            {"Lambda", ctx.model.Lambda},
                            {"Lambda_est", sig.Lambda_est},
                            {"hyp_lambda", ctx.model.hyp_lambda},
                            {"inverse_norm_sq", sig.inverse_norm_sq},
                            {"condition_value", sig.condition_value}};
    j["driver"] = {{"name", ctx.driver.name},
                   {"pass", drv.pass},
                   {"M_psi", ctx.driver.M_psi},
                   {"worst_slope", drv.worst_slope},
                   {"worst_bound", drv.worst_bound}};
    CsvWriter w({"check", "value", "pass"});
    w.add_row(std::vector<std::string>{"dissipativity_worst_ratio", format_double(diss.worst_ratio), diss.pass ? "1" : "0"});
    w.add_row(std::vector<std::string>{"sigma_Lambda_est", format_double(sig.Lambda_est), sig.pass ? "1" : "0"});
    w.add_row(std::vector<std::string>{"sigma_condition_value", format_double(sig.condition_value), sig.pass ? "1" : "0"});
    w.add_row(std::vector<std::string>{"driver_worst_slope", format_double(drv.worst_slope), drv.pass ? "1" : "0"});
    w.add_row(std::vector<std::string>{"driver_worst_bound", format_double(drv.worst_bound), drv.pass ? "1" : "0"});
    bool pass = diss.pass && sig.pass && drv.pass;
    if (!ctx.domain.is_whole_space()) {
        const auto inv = check_domain_invariants(ctx.domain, derive_seed(ctx.cfg.seed, "domain-check"));
        const bool ok = inv.pass();
        j["domain"] = {{"description", ctx.domain.description()},
                       {"pass", ok},
                       {"interior_fixed_point", inv.interior_fixed_point},
                       {"boundary_normal", inv.boundary_normal},
                       {"obtuse_angle", inv.obtuse_angle},
                       {"monotonicity", inv.monotonicity},
                       {"anchor", inv.anchor},
                       {"idempotence", inv.idempotence},
                       {"nonexpansive", inv.nonexpansive},
                       {"penalty_dissipativity", inv.penalty_dissipativity}};
        w.add_row(std::vector<std::string>{"domain_invariants", "0", ok ? "1" : "0"});
        pass = pass && ok;
    }
    j["pass"] = pass;
    ctx.emit_json("hypotheses.json", j);
    ctx.emit_csv("hypotheses.csv", w);
    std::cout << "hypotheses: " << (pass ? "pass" : "FAIL") << "  Lambda=" << sig.Lambda_est
              << "  condition=" << sig.condition_value << "\n";
    if (!pass) throw CheckFailed("hypothesis check failed");
    return kOk;
}

int cmd_simulate(Context& ctx) {
    const auto& s = ctx.cfg.sim;
    SimConfig sc;
    sc.dt = s.dt;
    sc.horizon_T = s.T;
    sc.n_paths = s.n_paths;
    sc.seed = ctx.cfg.seed;
    sc.record_stride = s.record_stride;
    sc.n_threads = ctx.cfg.threads;
    sc.penalization_n = s.n_penal;
    const std::string scheme = s.scheme == "auto" ? (ctx.dom() ? "projected" : "unreflected") : s.scheme;
    sc.scheme = scheme == "projected" ? Scheme::projected : scheme == "penalized" ? Scheme::penalized : Scheme::unreflected;
    const Point x0 = s.x0.empty() ? reference_point(ctx.dom(), ctx.model.dim) : s.x0;
    const PathBundle bundle = simulate(ctx.model, ctx.dom(), x0, sc);

    CsvWriter w({"t", "p", "estimate", "stderr"});
    for (const auto& r : estimate_moments(bundle, s.powers)) w.add_row(std::vector<double>{r.t, r.p, r.estimate, r.std_error});
    ctx.emit_csv("moments.csv", w);

    json j{{"scheme", to_string(sc.scheme)}, {"dt", sc.dt}, {"T", sc.horizon_T}, {"n_paths", sc.n_paths}, {"x0", x0}};
    if (bundle.has_local_time()) {
        CsvWriter lt({"t", "mean_K"});
        for (std::size_t k = 0; k < bundle.n_times(); ++k) {
            double m = 0.0;
            for (std::size_t p = 0; p < bundle.n_paths; ++p) m += bundle.K(p, k);
            lt.add_row(std::vector<double>{bundle.times[k], m / static_cast<double>(bundle.n_paths)});
        }
        ctx.emit_csv("local_time.csv", lt);
        j["variational_inequality_max"] = check_variational_inequality(bundle, ctx.domain, constant_process(x0));
    }
    ctx.emit_json("simulate.json", j);
    return kOk;
}

int cmd_mixing(Context& ctx) {
    const auto& m = ctx.cfg.mixing;
    MixingConfig mc;
    mc.dt = m.dt;
    mc.horizon_T = m.T;
    mc.n_paths = m.n_paths;
    mc.seed = ctx.cfg.seed;
    mc.record_stride = m.record_stride;
    mc.snr_threshold = m.snr;
    mc.n_threads = ctx.cfg.threads;
    mc.scheme = ctx.dom() ? Scheme::projected : Scheme::unreflected;
    const std::size_t d = ctx.model.dim;
    const Point x = m.x.empty() ? Point(d, 0.5) : m.x;
    const Point y = m.y.empty() ? Point(d, -0.5) : m.y;
    const auto battery = default_test_battery(d);
    const auto reports = estimate_semigroup_gap(ctx.model, x, y, battery, mc, ctx.dom());

    json rows = json::array();
    for (const auto& r : reports) {
        CsvWriter w({"t", "gap", "stderr"});
        for (std::size_t k = 0; k < r.times.size(); ++k) w.add_row(std::vector<double>{r.times[k], r.gap[k], r.std_error[k]});
        ctx.emit_csv("mixing_" + r.test_function_id + ".csv", w);
        rows.push_back({{"test_function", r.test_function_id},
                        {"conclusive", r.conclusive},
                        {"mu", r.fitted_rate_mu},
                        {"mu_ci", {r.mu_ci_low, r.mu_ci_high}},
                        {"fit_window", {r.fit_window_start, r.fit_window_end}},
                        {"fit_points", r.fit_points}});
    }
    const auto joint = joint_decay_fit(reports, battery);
    ctx.emit_json("mixing.json", {{"x", x},
                                  {"y", y},
                                  {"reports", rows},
                                  {"joint", {{"mu", joint.mu}, {"C", joint.C}, {"holds", joint.holds}}}});
    return kOk;
}

int cmd_solve_discounted(Context& ctx) {
    const double alpha = ctx.cfg.bsde.alpha;
    const DiscountedSolution sol = solve_discounted(ctx.model, ctx.dom(), ctx.driver, alpha, ctx.bsde_config());
    ctx.emit_json("solution.json", solution_to_json(sol));
    double sup_grid = 0.0;
    const CsvWriter profile = value_profile(sol, [&](const Point& x) {
        const double v = evaluate_value(sol, x).value;
        sup_grid = std::max(sup_grid, std::abs(v));
        return v;
    });
    ctx.emit_csv("values.csv", profile);
    const double bound = sol.M_psi / alpha;
    const double sup_all = std::max(sup_grid, sol.diagnostics.max_abs_value_on_cloud);
    const bool ok = sup_all <= bound * (1.0 + 1e-9);
    ctx.emit_json("discounted.json", {{"alpha", alpha},
                                      {"lambda_alpha", sol.lambda_alpha},
                                      {"bound", bound},
                                      {"sup_abs_value", sup_all},
                                      {"bound_ok", ok},
                                      {"truncation_T", sol.truncation_T},
                                      {"basis", sol.basis.id()},
                                      {"transition_spectral_bound", sol.diagnostics.transition_spectral_bound}});
    std::cout << "alpha=" << alpha << "  lambda_alpha=" << sol.lambda_alpha << "  sup|v|=" << sup_all
              << "  bound=" << bound << "\n";
    if (!ok) throw CheckFailed("discounted bound violated");
    return kOk;
}

ErgodicSolution estimate_lambda(Context& ctx) {
    VanishingDiscountConfig vc;
    vc.alphas = ctx.cfg.bsde.alphas;
    vc.bsde = ctx.bsde_config();
    ErgodicSolution sol = vanishing_discount(ctx.model, ctx.dom(), ctx.driver, vc);
    CsvWriter w({"alpha", "lambda_alpha", "sup_change"});
    for (const auto& r : sol.alpha_trace) w.add_row(std::vector<double>{r.alpha, r.lambda_alpha, r.sup_change});
    ctx.emit_csv("alpha_trace.csv", w);
    ctx.emit_csv("vbar.csv", value_profile(sol.vbar, [&](const Point& x) { return evaluate_vbar(sol, x); }));
    ctx.emit_json("vbar_solution.json", solution_to_json(sol.vbar));
    ctx.emit_json("lambda.json", {{"lambda", sol.lambda},
                                  {"ci", sol.lambda_ci},
                                  {"r_fit", sol.r_fit},
                                  {"extrapolated", sol.extrapolated},
                                  {"warnings", sol.warnings}});
    std::cout << "lambda=" << sol.lambda << " +- " << sol.lambda_ci << "  (r=" << sol.r_fit << ")\n";
    return sol;
}

int cmd_estimate_lambda(Context& ctx) {
    estimate_lambda(ctx);
    return kOk;
}

GridProblem pde_problem(const Context& ctx, PdeMode mode, double alpha) {
    if (ctx.model.dim != 1) throw ConfigError("solve-pde needs a one-dimensional model");
    double a = ctx.cfg.pde.a, b = ctx.cfg.pde.b;
    if (!ctx.cfg.pde.has_interval) {
        if (ctx.domain.kind() != ConvexDomain::Kind::box)
            throw ConfigError("solve-pde needs a box domain or pde.a / pde.b");
        const Point far_lo{-1e300}, far_hi{1e300};
        Point lo(1), hi(1);
        ctx.domain.project(far_lo, lo);
        ctx.domain.project(far_hi, hi);
        a = lo[0];
        b = hi[0];
    }
    return grid_problem_from_model(ctx.model, ctx.driver, a, b, ctx.cfg.pde.grid, mode, alpha);
}

PdeSolution solve_pde(Context& ctx, PdeMode mode, double alpha) {
    const GridProblem prob = pde_problem(ctx, mode, alpha);
    const PdeSolution sol = mode == PdeMode::ergodic ? solve_ergodic_pde(prob) : solve_discounted_pde(prob);
    CsvWriter w({"x", "v"});
    for (std::size_t i = 0; i < sol.x.size(); ++i) w.add_row(std::vector<double>{sol.x[i], sol.v[i]});
    ctx.emit_csv("pde.csv", w);
    json j{{"mode", mode == PdeMode::ergodic ? "ergodic" : "discounted"},
           {"residual", sol.residual},
           {"iterations", sol.iterations},
           {"flux", {sol.flux_a, sol.flux_b}},
           {"one_sided_flux", {sol.one_sided_flux_a, sol.one_sided_flux_b}},
           {"interval", {prob.a, prob.b}},
           {"n_cells", prob.n_cells}};
    if (mode == PdeMode::ergodic) {
        j["lambda"] = sol.lambda;
    } else {
        j["alpha"] = alpha;
        j["bound_ok"] = sol.bound_ok;
    }
    ctx.emit_json("pde.json", j);
    return sol;
}

int cmd_solve_pde(Context& ctx) {
    const PdeMode mode = ctx.cfg.pde.mode == "ergodic" ? PdeMode::ergodic : PdeMode::discounted;
    const PdeSolution sol = solve_pde(ctx, mode, ctx.cfg.pde.alpha);
    if (mode == PdeMode::ergodic) std::cout << "lambda_pde=" << sol.lambda << "  residual=" << sol.residual << "\n";
    else std::cout << "residual=" << sol.residual << "  bound_ok=" << sol.bound_ok << "\n";
    if (mode == PdeMode::discounted && !sol.bound_ok) throw CheckFailed("discounted PDE bound violated");
    return kOk;
}

/// CSV with a header; the first dim columns are x, the remaining ones u. Nearest row wins.
ControlPolicy table_policy(const std::string& path, std::size_t dim, std::size_t m) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read policy file '" + path + "'");
    std::string line;
    std::getline(f, line);
    auto rows = std::make_shared<std::vector<double>>();
    const std::size_t width = dim + m;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::size_t count = 0;
        for (std::string cell; std::getline(ss, cell, ',');) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{}) throw ConfigError(path + ":" + std::to_string(line_no) + ": not a number");
            rows->push_back(v);
            ++count;
        }
        if (count != width)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns");
    }
    if (rows->empty()) throw ConfigError("policy file '" + path + "' has no rows");
    return callable_policy("table(" + path + ")", [rows, dim, width](double, std::span<const double> x, std::span<double> u) {
        const std::size_t n = rows->size() / width;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < n; ++r) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double t = (*rows)[r * width + i] - x[i];
                d2 += t * t;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = r;
            }
        }
        std::copy_n(rows->begin() + static_cast<std::ptrdiff_t>(best * width + dim), u.size(), u.begin());
    });
}

CostConfig cost_config(const Context& ctx) {
    const auto& c = ctx.cfg.control_eval;
    CostConfig cc;
    cc.dt = c.dt;
    cc.horizon_T = c.T;
    cc.n_paths = c.n_paths;
    cc.seed = ctx.cfg.seed;
    cc.burn_in_fraction = c.burn_in_fraction;
    cc.x0 = c.x0;
    cc.n_threads = ctx.cfg.threads;
    return cc;
}

std::size_t control_dim(const ControlSpec& c) { return c.is_finite() ? c.finite_set.front().size() : c.box_lo.size(); }

ControlPolicy policy_from(const Context& ctx, const std::string& spec, const ErgodicSolution& sol) {
    const ControlSpec& c = *ctx.control;
    if (spec == "optimal") return optimal_policy(c, sol);
    if (spec.rfind("const:", 0) == 0) {
        Point u;
        std::stringstream ss(spec.substr(6));
        for (std::string cell; std::getline(ss, cell, ',');) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw ConfigError("policy '" + spec + "': not a number");
            u.push_back(v);
        }
        if (u.size() != control_dim(c)) throw ConfigError("policy '" + spec + "': wrong control dimension");
        return constant_policy(u);
    }
    return table_policy(spec.substr(5), ctx.model.dim, control_dim(c));
}

int cmd_control_eval(Context& ctx) {
    if (!ctx.control) throw ConfigError("control-eval needs a [control] section");
    const ErgodicSolution sol = estimate_lambda(ctx);
    const ControlPolicy policy = policy_from(ctx, ctx.cfg.control_eval.policy, sol);
    const CostEstimate est = ergodic_cost(ctx.model, ctx.dom(), *ctx.control, policy, cost_config(ctx));
    ctx.emit_json("control.json", {{"policy", ctx.cfg.control_eval.policy},
                                   {"I", est.I},
                                   {"stderr", est.std_error},
                                   {"lambda_ref", sol.lambda},
                                   {"gap", est.I - sol.lambda}});
    std::cout << "I=" << est.I << " +- " << est.std_error << "  lambda_ref=" << sol.lambda << "\n";
    return kOk;
}

struct ComparisonRow {
    std::string quantity;
    double estimate, reference, tolerance;
    bool lower_bound;  // estimate >= reference - tolerance instead of |estimate - reference| <= tolerance
    bool pass() const {
        return lower_bound ? estimate >= reference - tolerance : std::abs(estimate - reference) <= tolerance;
    }
};

int cmd_full_pipeline(Context& ctx) {
    const auto& tol = ctx.cfg.tolerances;
    std::vector<ComparisonRow> rows;
    const ErgodicSolution sol = estimate_lambda(ctx);

    std::optional<double> lambda_pde;
    if (ctx.model.dim == 1 && (ctx.cfg.pde.has_interval || ctx.domain.kind() == ConvexDomain::Kind::box)) {
        lambda_pde = solve_pde(ctx, PdeMode::ergodic, 0.0).lambda;
        rows.push_back({"lambda_vanishing_discount", sol.lambda, *lambda_pde, tol.lambda_pde, false});
    }

    LongRunConfig lc;
    lc.dt = ctx.cfg.long_run.dt;
    lc.horizon_T = ctx.cfg.long_run.T;
    lc.n_paths = ctx.cfg.long_run.n_paths;
    lc.seed = ctx.cfg.seed;
    lc.n_threads = ctx.cfg.threads;
    std::vector<Point> starts = ctx.cfg.long_run.starts;
    if (starts.empty()) {
        // x_ref and two shifted copies along the first axis, projected back into the domain.
        for (double shift : {0.0, -0.5, 0.5}) {
            Point p = sol.x_ref, q(p.size());
            p[0] += shift;
            if (ctx.dom()) {
                ctx.domain.project(p, q);
                p = q;
            }
            starts.push_back(p);
        }
    }
    const auto uniq = check_lambda_uniqueness(ctx.model, ctx.dom(), ctx.driver, sol, starts, lc);
    CsvWriter lr({"start", "lambda", "stderr"});
    double lambda_long = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        lr.add_row(std::vector<double>{static_cast<double>(i), uniq.lambdas[i], uniq.std_errors[i]});
        lambda_long += uniq.lambdas[i] / static_cast<double>(starts.size());
    }
    ctx.emit_csv("long_run.csv", lr);
    rows.push_back({"lambda_long_run", lambda_long, lambda_pde.value_or(sol.lambda), tol.lambda_long_run, false});

    json control_summary;
    if (ctx.control) {
        const CostConfig cc = cost_config(ctx);
        const CostEstimate opt = ergodic_cost(ctx.model, ctx.dom(), *ctx.control, optimal_policy(*ctx.control, sol), cc);
        rows.push_back({"cost_optimal_feedback", opt.I, sol.lambda, tol.control, false});
        control_summary = {{"I", opt.I}, {"stderr", opt.std_error}, {"lambda_ref", sol.lambda}, {"gap", opt.I - sol.lambda}};
        if (ctx.cfg.control_eval.compare_constants && ctx.control->is_finite()) {
            CsvWriter cw({"u", "I", "stderr"});
            for (const Point& u : ctx.control->finite_set) {
                const CostEstimate e = ergodic_cost(ctx.model, ctx.dom(), *ctx.control, constant_policy(u), cc);
                cw.add_row(std::vector<double>{u[0], e.I, e.std_error});
                rows.push_back({"cost_constant_" + format_double(u[0]), e.I, sol.lambda, tol.control, true});
            }
            ctx.emit_csv("control_constants.csv", cw);
        }
        ctx.emit_json("control.json", control_summary);
    }

    CsvWriter cmp({"quantity", "estimate", "reference", "abs_diff", "tolerance", "kind", "pass"});
    bool all = true;
    for (const auto& r : rows) {
        all = all && r.pass();
        cmp.add_row(std::vector<std::string>{r.quantity, format_double(r.estimate), format_double(r.reference),
                                             format_double(std::abs(r.estimate - r.reference)),
                                             format_double(r.tolerance), r.lower_bound ? "lower_bound" : "abs_diff",
                                             r.pass() ? "1" : "0"});
        std::cout << (r.pass() ? "ok   " : "FAIL ") << r.quantity << "  " << r.estimate << " vs " << r.reference << "\n";
    }
    ctx.emit_csv("comparison.csv", cmp);
    ctx.emit_json("pipeline.json", {{"lambda", sol.lambda},
                                    {"lambda_ci", sol.lambda_ci},
                                    {"lambda_pde", lambda_pde ? json(*lambda_pde) : json(nullptr)},
                                    {"lambda_long_run", lambda_long},
                                    {"lambda_spread", uniq.max_spread},
                                    {"control", control_summary},
                                    {"pass", all}});
    if (!all) throw CheckFailed("pipeline comparison outside tolerance");
    return kOk;
}

fs::path resolve_output(const ExperimentConfig& cfg, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("ERGOLAB_OUT"); env && *env) return env;
    return "ergolab_out";
}

void prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const fs::path probe = dir / ".ergolab_write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw OutputError("output directory '" + dir.string() + "' is not writable");
    }
    fs::remove(probe, ec);
}

void write_manifest(const Context& ctx, const std::string& status) {
    const json cfg_json = config_to_json(ctx.cfg);
    const json m{{"tool", "ergolab"},
                 {"version", kVersion},
                 {"subcommand", ctx.subcommand},
                 {"status", status},
                 {"seed", ctx.cfg.seed},
                 {"config_hash", fnv1a_hex(cfg_json.dump())},
                 {"config", cfg_json},
                 {"libraries",
                  {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"toml++", std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." +
                                  std::to_string(TOML_LIB_PATCH)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"cli11", CLI11_VERSION}}},
                 {"artifacts", ctx.artifacts}};
    try {
        write_json(ctx.out / "manifest.json", m);
    } catch (const std::exception& e) {
        throw OutputError(e.what());
    }
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s + "]";
}

std::string toml_string(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') q += '\\';
        q += c;
    }
    return q + "\"";
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"ergolab: ergodic BSDE and ergodic control experiments"};
    app.set_version_flag("--version", kVersion);
    app.fallthrough();
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "TOML experiment configuration");
    app.add_option("--set", sets, "override a configuration key, e.g. --set bsde.dt=0.005")->allow_extra_args(false);
    app.add_option("-o,--out", out_dir, "output directory (default: output_dir, $ERGOLAB_OUT, ./ergolab_out)");

    app.add_subcommand("check-hypotheses", "sample the standing assumptions");
    app.add_subcommand("simulate", "forward simulation and moment estimates");
    app.add_subcommand("mixing", "semigroup gap decay");
    auto* sd = app.add_subcommand("solve-discounted", "discounted BSDE at one alpha");
    std::optional<double> sd_alpha;
    std::string sd_model, sd_domain;
    sd->add_option("--alpha", sd_alpha, "discount factor");
    sd->add_option("--model", sd_model, "model preset");
    sd->add_option("--domain", sd_domain, "domain preset");
    auto* el = app.add_subcommand("estimate-lambda", "vanishing-discount ergodic constant");
    std::vector<double> el_alphas;
    el->add_option("--alphas", el_alphas, "decreasing discount schedule, comma separated")->delimiter(',');
    auto* sp = app.add_subcommand("solve-pde", "finite-difference oracle (1D)");
    std::optional<std::size_t> sp_grid;
    std::string sp_mode;
    std::optional<double> sp_alpha;
    sp->add_option("--grid", sp_grid, "number of cells");
    sp->add_option("--mode", sp_mode, "ergodic | discounted");
    sp->add_option("--alpha", sp_alpha, "discount factor (discounted mode)");
    auto* ce = app.add_subcommand("control-eval", "ergodic cost of a policy");
    std::string ce_policy;
    std::optional<double> ce_T;
    ce->add_option("--policy", ce_policy, "optimal | const:<u> | file:<csv>");
    ce->add_option("--T", ce_T, "horizon");
    app.add_subcommand("full-pipeline", "lambda, PDE oracle, long-run average and control comparison");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    if (sd_alpha) sets.push_back("bsde.alpha=" + format_double(*sd_alpha));
    if (!sd_model.empty()) sets.push_back("model.preset=" + toml_string(sd_model));
    if (!sd_domain.empty()) sets.push_back("domain.preset=" + toml_string(sd_domain));
    if (!el_alphas.empty()) sets.push_back("bsde.alphas=" + join_doubles(el_alphas));
    if (sp_grid) sets.push_back("pde.grid=" + std::to_string(*sp_grid));
    if (!sp_mode.empty()) sets.push_back("pde.mode=" + toml_string(sp_mode));
    if (sp_alpha) sets.push_back("pde.alpha=" + format_double(*sp_alpha));
    if (!ce_policy.empty()) sets.push_back("control_eval.policy=" + toml_string(ce_policy));
    if (ce_T) sets.push_back("control_eval.T=" + format_double(*ce_T));

    std::optional<Context> ctx;
    try {
        const ExperimentConfig cfg = config_path.empty() ? parse_config("", sets) : load_config(config_path, sets);
        const fs::path out = resolve_output(cfg, out_dir);
        ctx.emplace(make_context(cfg, sub, out));
        prepare_output(out);
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOutputError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }

    auto finish = [&](const std::string& status, int code) -> int {
        try {
            write_manifest(*ctx, status);
        } catch (const OutputError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kOutputError;
        }
        return code;
    };
    try {
        int rc = kOk;
        if (sub == "check-hypotheses") rc = cmd_check_hypotheses(*ctx);
        else if (sub == "simulate") rc = cmd_simulate(*ctx);
        else if (sub == "mixing") rc = cmd_mixing(*ctx);
        else if (sub == "solve-discounted") rc = cmd_solve_discounted(*ctx);
        else if (sub == "estimate-lambda") rc = cmd_estimate_lambda(*ctx);
        else if (sub == "solve-pde") rc = cmd_solve_pde(*ctx);
        else if (sub == "control-eval") rc = cmd_control_eval(*ctx);
        else rc = cmd_full_pipeline(*ctx);
        return finish("ok", rc);
    } catch (const CheckFailed& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return finish("check_failed", kCheckFailed);
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOutputError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return finish("numerical_failure", kNumericalFailure);
    }
}

}  // namespace ergolab::cli
