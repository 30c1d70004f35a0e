#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ergolab {

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

MeanEstimate mean_and_stderr(std::span<const double> samples);

/// Streaming mean/variance (Welford).
class RunningStats {
  public:
    void add(double x);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;
    double stderr_of_mean() const;
    MeanEstimate estimate() const { return {mean(), stderr_of_mean(), n_}; }

  private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y ~ intercept + slope * x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slope of log(y) against log(x); all inputs must be positive.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace ergolab
