#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ergolab/convex_domain.hpp"
#include "ergolab/model.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

enum class Scheme { unreflected, penalized, projected };

std::string to_string(Scheme s);

struct SimConfig {
    double dt = 1e-3;
    double horizon_T = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::unreflected;
    double penalization_n = 0.0;   // n of F_n, penalized scheme only
    double stiff_factor = 0.1;     // penalized substeps keep h <= stiff_factor / n
    std::size_t record_stride = 1; // store every k-th step (memory control)
    bool keep_increments = false;  // retain Brownian increments at the recorded resolution
    std::size_t n_threads = 0;     // 0 = hardware concurrency

    void validate() const;
    std::size_t n_steps() const;
};

/// Batch of simulated trajectories, path-major.
struct PathBundle {
    std::size_t dim = 0;
    std::size_t n_paths = 0;
    Scheme scheme = Scheme::unreflected;
    double dt = 0.0;
    std::size_t record_stride = 1;
    std::vector<double> times;       // recorded times, times[0] = 0
    std::vector<double> states;      // [path][time][dim]
    std::vector<double> local_time;  // [path][time]; projected scheme only
    std::vector<std::uint32_t> contacts;  // projection events inside (t_{k-1}, t_k]; projected only
    std::vector<double> increments;  // [path][interval][dim], W(t_{k+1}) - W(t_k); optional

    std::size_t n_times() const { return times.size(); }
    bool has_local_time() const { return !local_time.empty(); }
    bool has_increments() const { return !increments.empty(); }

    std::span<const double> state(std::size_t path, std::size_t k) const {
        return {states.data() + (path * n_times() + k) * dim, dim};
    }
    double K(std::size_t path, std::size_t k) const { return local_time[path * n_times() + k]; }
    std::span<const double> increment(std::size_t path, std::size_t k) const {
        return {increments.data() + (path * (n_times() - 1) + k) * dim, dim};
    }
};

/// One explicit step of the configured scheme. Owns scratch buffers; not thread-safe.
class Stepper {
  public:
    Stepper(const ModelSpec& model, const ConvexDomain* domain, Scheme scheme, double penalization_n = 0.0);

    /// Advances x by h with Brownian increment dw. `extra_drift` (may be empty) is added to f.
    /// Returns the local-time increment |x_tentative - project(x_tentative)| (0 unless projected).
    double step(std::span<double> x, std::span<const double> dw, double h,
                std::span<const double> extra_drift = {});

    bool tamed() const { return tamed_; }

  private:
    ModelSpec model_;
    const ConvexDomain* domain_;
    Scheme scheme_;
    double n_;
    bool tamed_;
    std::vector<double> f_, tmp_, sig_, proj_;
};

PathBundle simulate_unreflected(const ModelSpec& model, const Point& x0, const SimConfig& cfg);

/// Penalized dynamics d + F_n + b. Steps larger than stiff_factor / n are split into substeps
/// whose Brownian increments are bridged from the coarse increment, so the coarse Brownian
/// path matches the other schemes at the same seed.
PathBundle simulate_penalized(const ModelSpec& model, const ConvexDomain& domain, double n, const Point& x0,
                              const SimConfig& cfg);

/// Projected Euler scheme with discrete local time.
PathBundle simulate_reflected(const ModelSpec& model, const ConvexDomain& domain, const Point& x0,
                              const SimConfig& cfg);

/// Dispatches on cfg.scheme (domain may be null for the unreflected scheme).
PathBundle simulate(const ModelSpec& model, const ConvexDomain* domain, const Point& x0, const SimConfig& cfg);

struct MomentRow {
    double t = 0.0;
    double p = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    bool finite = true;
};

/// Monte-Carlo estimates of E|X_t|^p at every stored time.
std::vector<MomentRow> estimate_moments(const PathBundle& bundle, const std::vector<double>& powers);

/// z(path, time index, t, out) must return a point of closure(G).
using TestProcess = std::function<void(std::size_t path, std::size_t k, double t, std::span<double> out)>;

TestProcess constant_process(const Point& z);

/// max over paths of sum_k (X_{t_k} - z_{t_k}, grad phi(X_{t_k}) dK_k) with dK_k the local-time
/// increment realised on (t_{k-1}, t_k]. Non-positive for valid reflections.
double check_variational_inequality(const PathBundle& bundle, const ConvexDomain& domain, const TestProcess& z);

struct PenalizationRow {
    double n = 0.0;
    double mean_sup_pow = 0.0;  // E sup_t |X^n_t - X_t|^p
    double std_error = 0.0;
};

struct PenalizationStudy {
    std::vector<PenalizationRow> rows;
    double p = 4.0;
    double loglog_slope = 0.0;
    double slope_stderr = 0.0;
};

/// Runs the projected scheme and the penalized scheme for every n on identical Brownian
/// increments (one fine grid of step dt) and regresses log E sup|X^n - X|^p on log n.
PenalizationStudy penalization_study(const ModelSpec& model, const ConvexDomain& domain, const Point& x0,
                                     const std::vector<double>& n_values, double dt, double horizon,
                                     std::size_t n_paths, std::uint64_t seed, double p = 4.0);

/// Splits the coarse increment `total` over `m` substeps of length h/m (Brownian bridge),
/// using extra normals from (path, step, substep = 1..m-1). Writes m * dim values.
void bridge_increments(const NormalSource& rng, std::uint64_t path, std::uint64_t step, std::size_t m,
                       double h, std::span<const double> total, std::span<double> out);

/// Runs fn(begin, end) over [0, n) split across threads; rethrows the first failure.
void parallel_for_paths(std::size_t n, std::size_t n_threads,
                        const std::function<void(std::size_t begin, std::size_t end)>& fn);

}  // namespace ergolab
