#pragma once

#include <cstdint>
#include <string>

#include "ergolab/types.hpp"

namespace ergolab {

/// Open convex set G = {phi > 0} with closed-form Euclidean projection onto its closure.
///
/// The anchor (c, gamma) satisfies (x - c, beta(x)) >= gamma |beta(x)| for every x, where
/// beta(x) = x - project(x).
class ConvexDomain {
  public:
    enum class Kind { whole_space, half_space, ball, box, custom };

    ConvexDomain(Kind kind, std::size_t dim, ScalarField phi, VectorField grad_phi, VectorField project,
                 Point anchor_c, double anchor_gamma, std::string description);

    Kind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const std::string& description() const { return description_; }
    const Point& anchor_c() const { return anchor_c_; }
    double anchor_gamma() const { return anchor_gamma_; }
    bool is_whole_space() const { return kind_ == Kind::whole_space; }

    double phi(std::span<const double> x) const { return phi_(x); }
    void grad_phi(std::span<const double> x, std::span<double> out) const { grad_phi_(x, out); }
    void project(std::span<const double> x, std::span<double> out) const { project_(x, out); }

    /// True when x lies in the closure of G (phi >= -tol).
    bool contains(std::span<const double> x, double tol = 0.0) const { return phi_(x) >= -tol; }

  private:
    Kind kind_;
    std::size_t dim_;
    ScalarField phi_;
    VectorField grad_phi_;
    VectorField project_;
    Point anchor_c_;
    double anchor_gamma_;
    std::string description_;
};

/// R^d itself: projection is the identity and the penalty vanishes.
ConvexDomain make_whole_space(std::size_t dim);

/// {x : (normal, x) > offset}; normal is normalized internally.
ConvexDomain make_half_space(const Point& normal, double offset);

ConvexDomain make_ball(const Point& center, double radius);

ConvexDomain make_box(const Point& lo, const Point& hi);

/// User-supplied geometry; the projection must be exact.
ConvexDomain make_custom_domain(std::size_t dim, ScalarField phi, VectorField grad_phi, VectorField project,
                                Point anchor_c, double anchor_gamma, std::string description = "custom");

/// beta(x) = x - project(x).
Point beta(const ConvexDomain& domain, std::span<const double> x);
void beta(const ConvexDomain& domain, std::span<const double> x, std::span<double> out);

/// F_n(x) = -2 n beta(x).
Point penalization_drift(const ConvexDomain& domain, double n, std::span<const double> x);
void penalization_drift(const ConvexDomain& domain, double n, std::span<const double> x, std::span<double> out);

/// Worst sampled value of each geometric invariant. Every entry should be <= 0 (up to
/// round-off) for a valid domain.
struct DomainInvariantReport {
    double interior_fixed_point = 0.0;  // max |project(x) - x| over x in closure(G)
    double boundary_normal = 0.0;       // max ||grad phi| - 1| over boundary points
    double obtuse_angle = 0.0;          // max (x' - x, beta(x)), x' in closure(G)
    double monotonicity = 0.0;          // max (x' - x, beta(x)) - (beta(x'), beta(x))
    double anchor = 0.0;                // max gamma |beta(x)| - (x - c, beta(x))
    double idempotence = 0.0;           // max |project(project(x)) - project(x)|
    double nonexpansive = 0.0;          // max |Px - Py| - |x - y|
    double penalty_dissipativity = 0.0; // max (F_n(x) - F_n(y), x - y) with n = 1
    bool pass(double tol = 1e-9) const;
};

DomainInvariantReport check_domain_invariants(const ConvexDomain& domain, std::uint64_t seed,
                                              std::size_t n_samples = 2000, double radius = 5.0);

}  // namespace ergolab
