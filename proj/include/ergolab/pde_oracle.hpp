#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ergolab/model.hpp"

namespace ergolab {

enum class PdeMode { ergodic, discounted };

/// 1D problem 1/2 sigma^2 v'' + f v' + psi(x, v' sigma) = lambda (ergodic) or = alpha v
/// (discounted) on [a, b] with v'(a) = v'(b) = 0.
struct GridProblem {
    double a = -1.0, b = 1.0;
    std::size_t n_cells = 200;
    std::function<double(double)> f;
    std::function<double(double)> sigma;
    std::function<double(double x, double z)> psi;
    std::function<double(double x, double z)> psi_z;  // optional derivative in z
    PdeMode mode = PdeMode::ergodic;
    double alpha = 0.0;
    double x_ref = 0.0;      // ergodic normalization v(x_ref) = 0
    double M_psi = 0.0;      // used by the discounted bound check when > 0
    std::size_t max_iter = 50;
    double tol = 1e-10;

    void validate() const;
};

struct PdeSolution {
    std::vector<double> x, v;
    double lambda = 0.0;          // ergodic mode only
    double residual = 0.0;        // sup-norm of the discrete equations
    std::size_t iterations = 0;
    double flux_a = 0.0, flux_b = 0.0;                  // discrete flux of the ghost-node stencil
    double one_sided_flux_a = 0.0, one_sided_flux_b = 0.0;  // second-order one-sided v' (O(h^2))
    bool bound_ok = true;         // discounted: sup |v| <= M_psi / alpha
};

PdeSolution solve_ergodic_pde(const GridProblem& prob);
PdeSolution solve_discounted_pde(const GridProblem& prob);

/// Linear interpolation of the grid function.
double interpolate(const PdeSolution& sol, double x);

/// Grid problem on [a, b] from a 1D model (f = d + b, sigma) and driver.
GridProblem grid_problem_from_model(const ModelSpec& model, const DriverSpec& driver, double a, double b,
                                    std::size_t n_cells, PdeMode mode, double alpha = 0.0);

}  // namespace ergolab
