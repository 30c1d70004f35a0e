#pragma once

#include <string>
#include <vector>

#include "ergolab/types.hpp"

namespace ergolab {

/// Total-degree tensor basis on scaled coordinates u_i = (x_i - center_i) / scale_i.
///
/// legendre: products of Legendre polynomials P_k(u_i).
/// cosine:   products of cos(k pi (u_i + 1) / 2); every element has zero normal derivative
///           on the faces u_i = +-1, which suits Neumann problems on a box.
class Basis {
  public:
    enum class Family { legendre, cosine };

    Basis(Family family, std::size_t dim, int degree, Point center, Point scale);

    Family family() const { return family_; }
    std::size_t dim() const { return dim_; }
    int degree() const { return degree_; }
    std::size_t size() const { return exps_.size(); }
    const Point& center() const { return center_; }
    const Point& scale() const { return scale_; }
    std::string id() const;

    void eval(std::span<const double> x, std::span<double> out) const;

    /// out[k * dim + i] = d b_k / d x_i.
    void gradient(std::span<const double> x, std::span<double> out) const;

    /// Multi-index of element k; element 0 is always the constant.
    const std::vector<int>& exponents(std::size_t k) const { return exps_[k]; }

  private:
    void univariate(double u, std::span<double> val, std::span<double> der) const;

    Family family_;
    std::size_t dim_;
    int degree_;
    Point center_, scale_;
    std::vector<std::vector<int>> exps_;
};

std::string to_string(Basis::Family f);
Basis::Family basis_family_from_string(const std::string& name);

}  // namespace ergolab
