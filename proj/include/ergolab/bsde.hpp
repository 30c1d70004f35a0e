#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/basis.hpp"
#include "ergolab/convex_domain.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

struct BsdeConfig {
    double dt = 1e-2;
    std::size_t cloud_size = 20000;  // regression sample
    double burn_in = 3.0;            // forward time before the cloud snapshot
    Point cloud_start;               // empty: x_ref
    std::string basis = "auto";      // legendre | cosine | auto (cosine on boxes)
    int degree = 6;
    double trunc_tol_rel = 1e-4;     // truncation tolerance relative to M_psi / alpha
    double horizon_override = 0.0;   // > 0 replaces the derived truncation horizon
    std::size_t slice_stride = 0;    // store every k-th slice (0: first and last only)
    std::uint64_t seed = 0;
    std::size_t n_threads = 0;
};

struct BsdeDiagnostics {
    double truncation_bound = 0.0;  // M_psi e^{-alpha T} / alpha
    std::size_t n_steps = 0;
    std::size_t cloud_size = 0;
    std::size_t basis_size = 0;
    double dt = 0.0;
    double max_abs_value_on_cloud = 0.0;
    double transition_spectral_bound = 0.0;  // max |eigenvalue| of the one-step regression operator
};

/// v^alpha and its Z-field, both represented on one basis. The stored slices hold the
/// coefficients at selected backward times; `coefficients` is the time-0 slice, used as
/// the stationary representation.
struct DiscountedSolution {
    double alpha = 0.0;
    Basis basis{Basis::Family::legendre, 1, 0, Point{0.0}, Point{1.0}};
    std::vector<double> coefficients;
    std::vector<double> slice_times;                // backward time of each stored slice, 0 = final
    std::vector<std::vector<double>> slice_coefficients;
    MatrixField diffusion;                          // sigma of the forward model, for Z = grad v sigma
    double lambda_alpha = 0.0;                      // alpha v^alpha(x_ref)
    Point x_ref;
    double truncation_T = 0.0;
    double M_psi = 0.0;
    Point hull_lo, hull_hi;                         // bounding box of the regression cloud
    BsdeDiagnostics diagnostics;
};

struct ValueEvaluation {
    double value = 0.0;
    bool extrapolated = false;
};

struct ZEvaluation {
    Point z;
    bool extrapolated = false;
};

ValueEvaluation evaluate_value(const DiscountedSolution& sol, std::span<const double> x);
ZEvaluation evaluate_z(const DiscountedSolution& sol, std::span<const double> x);

/// x_ref = 0 when 0 lies in closure(G) (or there is no domain), the domain anchor otherwise.
Point reference_point(const ConvexDomain* domain, std::size_t dim);

/// Forward cloud and one-step transitions shared by every discount factor of a study.
struct RegressionCloud {
    std::size_t dim = 0;
    double dt = 0.0;
    std::vector<double> states;       // [N][dim]
    std::vector<double> next_states;  // [N][dim]
    std::vector<double> increments;   // [N][dim]
    std::vector<double> sigma;        // [N][dim*dim]
    Point lo, hi;
    std::size_t size() const { return dim ? states.size() / dim : 0; }
};

RegressionCloud build_cloud(const ModelSpec& model, const ConvexDomain* domain, const BsdeConfig& cfg);

/// Chooses the basis for a cloud: cosine on boxes (when requested or "auto"), Legendre on
/// the cloud's bounding box otherwise.
Basis make_basis(const BsdeConfig& cfg, const ConvexDomain* domain, const RegressionCloud& cloud);

/// Discounted BSDE dY = -(psi(X, Z) - alpha Y) dt + Z dW on the truncated horizon, solved by
/// backward least-squares regression on a fixed cloud (time-homogeneous dynamics). Forward
/// dynamics are projected when `domain` is a proper domain and unreflected otherwise.
DiscountedSolution solve_discounted(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                    double alpha, const BsdeConfig& cfg);

/// Same, reusing a prebuilt cloud and basis.
DiscountedSolution solve_discounted(const ModelSpec& model, const ConvexDomain* domain, const DriverSpec& driver,
                                    double alpha, const BsdeConfig& cfg, const RegressionCloud& cloud,
                                    const Basis& basis);

/// Truncation horizon T with M_psi e^{-alpha T} / alpha <= trunc_tol_rel M_psi / alpha.
double truncation_horizon(double alpha, const BsdeConfig& cfg);

}  // namespace ergolab
