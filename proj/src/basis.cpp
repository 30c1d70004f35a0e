#include "ergolab/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ergolab {

namespace {

void enumerate(std::size_t dim, int degree, std::vector<int>& cur, std::size_t i, int left,
               std::vector<std::vector<int>>& out) {
    if (i == dim) {
        out.push_back(cur);
        return;
    }
    for (int k = 0; k <= left; ++k) {
        cur[i] = k;
        enumerate(dim, degree, cur, i + 1, left - k, out);
    }
    cur[i] = 0;
}

}  // namespace

Basis::Basis(Family family, std::size_t dim, int degree, Point center, Point scale)
    : family_(family), dim_(dim), degree_(degree), center_(std::move(center)), scale_(std::move(scale)) {
    if (dim_ == 0) throw std::invalid_argument("basis: dimension must be positive");
    if (degree_ < 0) throw std::invalid_argument("basis: degree must be >= 0");
    if (center_.size() != dim_ || scale_.size() != dim_) throw std::invalid_argument("basis: center/scale size");
    for (double s : scale_)
        if (!(s > 0.0)) throw std::invalid_argument("basis: scale must be positive");
    std::vector<int> cur(dim_, 0);
    enumerate(dim_, degree_, cur, 0, degree_, exps_);
    // Graded order: constant first, then by total degree.
    std::stable_sort(exps_.begin(), exps_.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (int v : a) sa += v;
        for (int v : b) sb += v;
        return sa < sb;
    });
}

std::string to_string(Basis::Family f) { return f == Basis::Family::legendre ? "legendre" : "cosine"; }

Basis::Family basis_family_from_string(const std::string& name) {
    if (name == "legendre" || name == "poly" || name == "polynomial") return Basis::Family::legendre;
    if (name == "cosine") return Basis::Family::cosine;
    throw std::invalid_argument("unknown basis family '" + name + "'");
}

std::string Basis::id() const {
    std::ostringstream s;
    s << to_string(family_) << "(dim=" << dim_ << ",degree=" << degree_ << ",size=" << size() << ")";
    return s.str();
}

void Basis::univariate(double u, std::span<double> val, std::span<double> der) const {
    if (family_ == Family::legendre) {
        val[0] = 1.0;
        der[0] = 0.0;
        if (degree_ >= 1) {
            val[1] = u;
            der[1] = 1.0;
        }
        for (int n = 1; n < degree_; ++n) {
            val[n + 1] = ((2.0 * n + 1.0) * u * val[n] - n * val[n - 1]) / (n + 1.0);
            der[n + 1] = der[n - 1] + (2.0 * n + 1.0) * val[n];
        }
    } else {
        const double w = 0.5 * std::numbers::pi * (u + 1.0);
        for (int k = 0; k <= degree_; ++k) {
            val[k] = std::cos(k * w);
            der[k] = -0.5 * std::numbers::pi * k * std::sin(k * w);
        }
    }
}

void Basis::eval(std::span<const double> x, std::span<double> out) const {
    const std::size_t m = static_cast<std::size_t>(degree_) + 1;
    std::vector<double> val(dim_ * m), der(dim_ * m);
    for (std::size_t i = 0; i < dim_; ++i)
        univariate((x[i] - center_[i]) / scale_[i], std::span(val).subspan(i * m, m), std::span(der).subspan(i * m, m));
    for (std::size_t k = 0; k < exps_.size(); ++k) {
        double v = 1.0;
        for (std::size_t i = 0; i < dim_; ++i) v *= val[i * m + exps_[k][i]];
        out[k] = v;
    }
}

void Basis::gradient(std::span<const double> x, std::span<double> out) const {
    const std::size_t m = static_cast<std::size_t>(degree_) + 1;
    std::vector<double> val(dim_ * m), der(dim_ * m);
    for (std::size_t i = 0; i < dim_; ++i)
        univariate((x[i] - center_[i]) / scale_[i], std::span(val).subspan(i * m, m), std::span(der).subspan(i * m, m));
    for (std::size_t k = 0; k < exps_.size(); ++k) {
        for (std::size_t j = 0; j < dim_; ++j) {
            double g = der[j * m + exps_[k][j]] / scale_[j];
            for (std::size_t i = 0; i < dim_; ++i)
                if (i != j) g *= val[i * m + exps_[k][i]];
            out[k * dim_ + j] = g;
        }
    }
}

}  // namespace ergolab
