#pragma once

#include <map>
#include <string>
#include <vector>

#include "ergolab/control.hpp"
#include "ergolab/convex_domain.hpp"
#include "ergolab/model.hpp"

namespace ergolab {

/// Numeric preset parameters; missing keys take the preset default.
using ParamMap = std::map<std::string, double>;

/// linear_ou   d = -theta x, b = 0, sigma = s I                      (theta, sigma, dim)
/// cubic       d = -x^3 - theta x, b = amp cos(x - phase), sigma = s I (theta, amp, phase, sigma, dim)
/// paper_sigma d = -x, b = 0, sigma piecewise 10 / 10 + x/10 / 10.1 in 1D
ModelSpec make_model_preset(const std::string& name, const ParamMap& params = {});

/// none | whole_space, half_space (offset: {x_1 > offset}), ball (radius), box (lo, hi per axis).
ConvexDomain make_domain_preset(const std::string& name, std::size_t dim, const ParamMap& params = {});

/// constant (c), cosine (amp cos(x_1) + shift), cos_abs_z (cos(x_1) - k |z|).
DriverSpec make_driver_preset(const std::string& name, const ParamMap& params = {});

/// quadratic_tracking L = min((x_1 - target)^2, cap) + u^2/2, R(u) = u e_1, U = n_controls points in [-1, 1]
/// cosine_cost        L = cos(x_1) + u^2/2, R and U as above
/// constant_cost      L = c, R = 0, U = {0}
ControlSpec make_control_preset(const std::string& name, std::size_t state_dim, const ParamMap& params = {});

std::vector<std::string> model_preset_names();
std::vector<std::string> domain_preset_names();
std::vector<std::string> driver_preset_names();
std::vector<std::string> control_preset_names();

}  // namespace ergolab
