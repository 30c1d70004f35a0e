#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/bsde.hpp"
#include "ergolab/sde_sim.hpp"

namespace ergolab {

struct VanishingDiscountConfig {
    std::vector<double> alphas{0.2, 0.1, 0.05, 0.02, 0.01};
    BsdeConfig bsde;
};

struct AlphaTraceRow {
    double alpha = 0.0;
    double lambda_alpha = 0.0;
    double sup_change = 0.0;  // sup over the evaluation set of |vbar^alpha - vbar^{previous alpha}|
};

struct ErgodicSolution {
    double lambda = 0.0;
    double lambda_ci = 0.0;      // half-width of the extrapolation uncertainty
    double r_fit = 0.0;          // fitted exponent in lambda^alpha = lambda + c alpha^r
    bool extrapolated = false;
    std::vector<std::string> warnings;
    DiscountedSolution vbar;     // v^{alpha_last} - v^{alpha_last}(x_ref) on the same basis
    std::vector<AlphaTraceRow> alpha_trace;
    std::optional<double> mu;    // boundary ergodic cost, set for non-zero Neumann problems
    Point x_ref;
    double M_psi = 0.0;
};

double evaluate_vbar(const ErgodicSolution& sol, std::span<const double> x);
Point evaluate_vbar_z(const ErgodicSolution& sol, std::span<const double> x);

struct RichardsonFit {
    double lambda = 0.0;
    double ci = 0.0;
    double r = 1.0;
    bool extrapolated = false;
    std::optional<std::string> warning;
};

/// Fits lambda^a = lambda + c a^r on the last three points of a strictly decreasing schedule.
RichardsonFit richardson_extrapolate(const std::vector<double>& alphas, const std::vector<double>& lambdas);

/// Runs solve_discounted for every alpha of the schedule on one shared regression cloud.
ErgodicSolution vanishing_discount(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                   const VanishingDiscountConfig& cfg);

struct LongRunConfig {
    double dt = 1e-2;
    double horizon_T = 50.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    bool zero_z = false;     // inject Z = 0 instead of the solution's Z-field
    double tol_rel = 0.05;
    std::size_t n_threads = 0;
};

struct LambdaUniquenessReport {
    std::vector<Point> starts;
    std::vector<double> lambdas;
    std::vector<double> std_errors;
    double max_spread = 0.0;
    double reference_lambda = 0.0;
    bool pass = false;
};

/// Long-run average (1/T) E sum psi(X, Z(X)) dt from every start point.
LambdaUniquenessReport check_lambda_uniqueness(const ModelSpec& model, const ConvexDomain* domain,
                                               const DriverSpec& driver, const ErgodicSolution& sol,
                                               const std::vector<Point>& start_points, const LongRunConfig& cfg);

/// Per-path trajectory values Y[path][time] on the time grid of a bundle. These are not
/// functions of X_t alone once a boundary cost enters.
struct TrajectoryValues {
    std::size_t n_paths = 0;
    std::size_t n_times = 0;
    std::vector<double> values;
    double at(std::size_t path, std::size_t k) const { return values[path * n_times + k]; }
};

using ZField = std::function<void(std::span<const double> x, std::span<double> z)>;

ZField z_field_of(const ErgodicSolution& sol);

/// vbar(X_t) along every path.
TrajectoryValues zero_neumann_values(const ErgodicSolution& sol, const PathBundle& bundle);

/// Yhat_t = vbar(X_t) - sum_{s < t} (g(X_s) - mu) dK_s (left-endpoint g).
TrajectoryValues neumann_transform_fixed_mu(const ErgodicSolution& zero_sol, const ScalarField& g, double mu,
                                            const PathBundle& bundle);

/// Yhat_t = vbar(X_t) + (target_lambda - lambda0) t - sum_{s < t} (g(X_s) - mu) dK_s.
TrajectoryValues neumann_transform_fixed_lambda(const ErgodicSolution& zero_sol, double target_lambda,
                                                const ScalarField& g, double mu, const PathBundle& bundle);

struct ResidualReport {
    double mean_abs_defect = 0.0;
    double signed_mean = 0.0;
    double rms = 0.0;
    std::size_t n_pairs = 0;
};

/// Defect Y_t - Y_T - sum (psi - lambda) ds - sum (g - mu) dK + sum Z dW over every pair
/// (t_k, t_{k+window}) of every path. `g` may be empty (zero Neumann cost). Needs the bundle's
/// increments, and its local time when g is given.
ResidualReport ebsde_residual(const TrajectoryValues& Y, const ZField& z_field, const DriverSpec& driver,
                              double lambda, const ScalarField& g, double mu, const PathBundle& bundle,
                              std::size_t window = 1);

}  // namespace ergolab
