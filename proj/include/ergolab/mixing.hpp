#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ergolab/convex_domain.hpp"
#include "ergolab/model.hpp"
#include "ergolab/sde_sim.hpp"

namespace ergolab {

struct TestFunction {
    std::string id;
    ScalarField phi;
    double sup_norm = 1.0;  // |Phi|_0
};

/// tanh of a linear functional, a smoothed bump and a bounded trigonometric function,
/// each with sup norm 1.
std::vector<TestFunction> default_test_battery(std::size_t dim);

struct MixingConfig {
    double dt = 1e-2;
    double horizon_T = 5.0;
    std::size_t n_paths = 20000;
    std::uint64_t seed = 0;
    std::size_t record_stride = 10;
    double snr_threshold = 5.0;  // fit only where gap > threshold * stderr
    std::size_t n_batches = 20;  // jackknife batches for the rate confidence interval
    Scheme scheme = Scheme::unreflected;
    double penalization_n = 0.0;
    std::size_t n_threads = 0;
};

struct MixingReport {
    std::string test_function_id;
    Point x, y;
    std::vector<double> times;
    std::vector<double> gap;
    std::vector<double> std_error;
    bool conclusive = false;
    double fitted_rate_mu = 0.0;
    double mu_ci_low = 0.0;   // 95% jackknife interval
    double mu_ci_high = 0.0;
    double log_prefactor = 0.0;  // intercept of log gap ~ a - mu t
    double fit_window_start = 0.0;
    double fit_window_end = 0.0;
    std::size_t fit_points = 0;
};

/// Simulates both ensembles on identical Brownian increments and fits the exponential decay
/// of |P_t Phi(x) - P_t Phi(y)| for every test function. `domain` is required for the
/// penalized and projected schemes.
std::vector<MixingReport> estimate_semigroup_gap(const ModelSpec& model, const Point& x, const Point& y,
                                                 const std::vector<TestFunction>& test_functions,
                                                 const MixingConfig& cfg, const ConvexDomain* domain = nullptr);

struct JointDecayFit {
    double mu = 0.0;         // smallest conclusive rate
    double C = 0.0;          // max over pairs/times of normalized gap * e^{mu t} on the calibration half
    double worst_excess = 0.0;  // max over the validation half of normalized (gap - 3 stderr) e^{mu t} / C
    bool holds = false;      // worst_excess <= 1
    std::size_t reports_used = 0;
};

/// Fits gap(t) / ((1+|x|^2+|y|^2) |Phi|_0) <= C e^{-mu t} jointly over several (x, y) pairs.
/// C is calibrated on t <= T/2 and checked on t > T/2.
JointDecayFit joint_decay_fit(const std::vector<MixingReport>& reports, const std::vector<TestFunction>& battery);

}  // namespace ergolab
