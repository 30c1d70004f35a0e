#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "ergolab/convex_domain.hpp"
#include "ergolab/ergodic.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

struct HamiltonianMin {
    double value = 0.0;
    Point u;
};

/// inf over U of L(x, u) + z R(u). Exact on finite U (lowest index wins ties); grid search
/// plus local zoom on boxes (lexicographic grid order wins ties).
HamiltonianMin minimize_hamiltonian(const ControlSpec& ctrl, std::span<const double> x, std::span<const double> z);

struct FeedbackPolicy {
    std::string description;
    std::function<Point(std::span<const double> x, std::span<const double> z)> gamma;
};

struct Hamiltonian {
    DriverSpec driver;
    FeedbackPolicy policy;
};

/// psi(x, z) = inf_u {L(x, u) + z R(u)} with M_psi = max(M_L, M_R), and its argmin selector.
Hamiltonian build_hamiltonian(const ControlSpec& ctrl);

/// Control process rho_t = rho(t, X_t).
struct ControlPolicy {
    std::string description;
    std::function<void(double t, std::span<const double> x, std::span<double> u)> rho;
};

ControlPolicy constant_policy(const Point& u);

/// rho_t = gamma(X_t, Z(X_t)) with Z the ergodic solution's Z-field.
ControlPolicy optimal_policy(const ControlSpec& ctrl, const ErgodicSolution& sol);

ControlPolicy callable_policy(std::string description,
                              std::function<void(double t, std::span<const double> x, std::span<double> u)> rho);

struct CostConfig {
    double dt = 1e-2;
    double horizon_T = 40.0;
    std::size_t n_paths = 2000;
    std::uint64_t seed = 0;
    double burn_in_fraction = 0.5;  // average L over [fraction * T, T]
    Point x0;                       // empty: x_ref
    std::size_t n_threads = 0;
};

struct CostEstimate {
    double I = 0.0;
    double std_error = 0.0;
};

/// Time-average of L(X_t, rho_t) under the controlled dynamics
/// dX = (f(X) + sigma(X) R(rho_t)) dt + sigma(X) dW (+ reflection when a domain is given).
CostEstimate ergodic_cost(const ModelSpec& model, const ConvexDomain* domain, const ControlSpec& ctrl,
                          const ControlPolicy& policy, const CostConfig& cfg);

/// Same quantity under the uncontrolled dynamics, reweighted by the Girsanov density
/// exp(sum R(rho) dW - 1/2 sum |R(rho)|^2 dt). High variance; meant for short horizons.
CostEstimate girsanov_cost(const ModelSpec& model, const ConvexDomain* domain, const ControlSpec& ctrl,
                           const ControlPolicy& policy, const CostConfig& cfg);

}  // namespace ergolab
