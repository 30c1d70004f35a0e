#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ergolab/types.hpp"

namespace ergolab {

class ConvexDomain;

/// Forward dynamics dV = (d(V) + b(V)) dt + sigma(V) dW together with the constants the
/// standing assumptions quantify over.
struct ModelSpec {
    std::string name;
    std::size_t dim = 1;
    VectorField dissipative_drift;  // d
    VectorField bounded_drift;      // b
    MatrixField diffusion;          // sigma, row-major dim x dim
    double eta = 1.0;               // (d(x)-d(y), x-y) <= -eta |x-y|^2
    double b_bound = 0.0;           // |b| <= B
    double sigma_bound = 1.0;       // operator norms of sigma and sigma^{-1} bounded by this
    double Lambda = 0.0;            // |(y, sigma(x+y)-sigma(x))| <= Lambda |y|
    double hyp_lambda = 1.0;        // lambda in 2(lambda - lambda^2 Lambda^2) > |||sigma^{-1}|||^2
    double poly_growth_nu = 1.0;    // |d(x)| <= C(1 + |x|^nu)

    /// f = d + b evaluated into out.
    void drift(std::span<const double> x, std::span<double> out) const;

    /// Throws std::invalid_argument when a structural invariant is violated.
    void validate() const;
};

struct DriverSpec {
    std::string name;
    DriverFn psi;
    double M_psi = 0.0;
    /// False when psi ignores z; lets solvers skip per-sample driver evaluations.
    bool depends_on_z = true;
    /// Optional specialisation of psi to a fixed set of states (row-major, dim columns):
    /// returns (i, z) -> psi(states_i, z). Must agree with psi.
    using BoundDriver = std::function<double(std::size_t i, std::span<const double> z)>;
    std::function<BoundDriver(std::span<const double> states, std::size_t dim)> bind_states;
};

/// Control ingredients: U is either a finite list of points or a box [lo, hi] in R^m.
struct ControlSpec {
    std::string name;
    std::size_t control_dim = 1;
    std::vector<Point> finite_set;  // used when non-empty
    Point box_lo, box_hi;           // used when finite_set is empty
    std::size_t box_grid = 21;      // points per axis of the initial search grid
    /// R : U -> R^d
    std::function<void(std::span<const double> u, std::span<double> out)> R;
    /// L : R^d x U -> R
    std::function<double(std::span<const double> x, std::span<const double> u)> L;
    double M_R = 0.0;
    double M_L = 0.0;
    std::size_t state_dim = 1;

    bool is_finite() const { return !finite_set.empty(); }
};

/// Model whose dissipative part is d + F_n (reflection penalty of the domain).
ModelSpec with_penalization(const ModelSpec& model, const ConvexDomain& domain, double n);

// ----------------------------------------------------------------------------
// Sampling-based hypothesis checks.

struct PointPair {
    Point x;
    Point y;
};

using PairSampler = std::function<PointPair(std::size_t index)>;

/// Uniform pairs on the ball of radius `radius`, with a fraction drawn on a ball of
/// radius `tail_radius` instead. Deterministic in (seed, index).
PairSampler ball_pair_sampler(std::size_t dim, std::uint64_t seed, double radius = 10.0,
                              double tail_radius = 50.0, double tail_fraction = 0.1);

/// Default sample size for every checker.
inline constexpr std::size_t kDefaultCheckPairs = 10000;

struct DissipativityReport {
    bool pass = false;
    double worst_ratio = 0.0;
    std::size_t pairs_used = 0;
};

/// worst_ratio = max over pairs of (d(x)-d(y), x-y)/|x-y|^2; pass iff worst_ratio <= -eta + tol.
DissipativityReport check_dissipativity(const ModelSpec& spec, const PairSampler& sampler,
                                        std::size_t n_pairs, double tol = 1e-6);

struct SigmaStructureReport {
    bool pass = false;
    double Lambda_est = 0.0;
    double inverse_norm_sq = 0.0;  // max over samples of |||sigma^{-1}|||^2
    double condition_value = 0.0;  // 2(lambda - lambda^2 Lambda^2) - |||sigma^{-1}|||^2
};

/// Estimates Lambda from the pairs (x, x') with y = x' - x and evaluates the structural
/// condition with max(spec.Lambda, Lambda_est). Throws NumericalError at a singular sample.
SigmaStructureReport check_sigma_structure(const ModelSpec& spec, const PairSampler& sampler,
                                           std::size_t n_pairs, double tol = 1e-2);

struct DriverReport {
    bool pass = false;
    double worst_slope = 0.0;   // max |psi(x,z)-psi(x,z')| / |z-z'|
    double worst_bound = 0.0;   // max |psi(x,0)|
    double worst_violation = 0.0;
};

/// Draws (x, z, z') from the pair sampler: x from the first point, z and z' from a scaled
/// copy of the pair. Pass iff both suprema are <= M_psi (1 + tol).
DriverReport check_driver(const DriverSpec& driver, std::size_t dim, const PairSampler& sampler,
                          std::size_t n_samples, double tol = 1e-6);

}  // namespace ergolab
