#include "doctest.h"

#include <cmath>
#include <vector>

#include "ergolab/stats.hpp"

using namespace ergolab;

TEST_CASE("mean and standard error") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const auto e = mean_and_stderr(x);
    CHECK(e.mean == doctest::Approx(2.5));
    // sample variance 5/3, stderr sqrt(5/3 / 4)
    CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 12.0)));
    CHECK(e.count == 4);
}

TEST_CASE("running stats agree with the batch estimate") {
    const std::vector<double> x{0.3, -1.2, 4.5, 2.2, 0.0, 9.1};
    RunningStats r;
    for (double v : x) r.add(v);
    const auto e = mean_and_stderr(x);
    CHECK(r.mean() == doctest::Approx(e.mean));
    CHECK(r.stderr_of_mean() == doctest::Approx(e.std_error));
}

TEST_CASE("line fits") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 - 0.5 * v);
    const auto f = fit_line(x, y);
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.intercept == doctest::Approx(2.0));
    CHECK(f.r_squared == doctest::Approx(1.0));

    std::vector<double> p;
    for (double v : x) p.push_back(3.0 * std::pow(v, -1.5));
    CHECK(fit_loglog(x, p).slope == doctest::Approx(-1.5));
}
