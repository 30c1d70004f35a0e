#include "ergolab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace ergolab {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw std::invalid_argument("csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) body_ += ',';
        body_ += format_double(row[i]);
    }
    body_ += '\n';
}

void CsvWriter::add_row(const std::vector<std::string>& row) {
    if (row.size() != header_.size()) throw std::invalid_argument("csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) body_ += ',';
        body_ += row[i];
    }
    body_ += '\n';
}

std::string CsvWriter::str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out += ',';
        out += header_[i];
    }
    out += '\n';
    return out + body_;
}

void CsvWriter::write(const std::filesystem::path& path) const { write_text(path, str()); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json solution_to_json(const DiscountedSolution& sol) {
    nlohmann::json j;
    j["format"] = "ergolab.discounted_solution";
    j["basis"] = {{"id", sol.basis.id()},
                  {"family", to_string(sol.basis.family())},
                  {"dim", sol.basis.dim()},
                  {"degree", sol.basis.degree()},
                  {"center", sol.basis.center()},
                  {"scale", sol.basis.scale()}};
    j["alpha"] = sol.alpha;
    j["truncation_T"] = sol.truncation_T;
    j["lambda_alpha"] = sol.lambda_alpha;
    j["M_psi"] = sol.M_psi;
    j["x_ref"] = sol.x_ref;
    j["hull_lo"] = sol.hull_lo;
    j["hull_hi"] = sol.hull_hi;
    j["coefficients"] = sol.coefficients;
    j["slice_times"] = sol.slice_times;
    j["slice_coefficients"] = sol.slice_coefficients;
    const auto& d = sol.diagnostics;
    j["diagnostics"] = {{"truncation_bound", d.truncation_bound},
                        {"n_steps", d.n_steps},
                        {"cloud_size", d.cloud_size},
                        {"basis_size", d.basis_size},
                        {"dt", d.dt},
                        {"max_abs_value_on_cloud", d.max_abs_value_on_cloud},
                        {"transition_spectral_bound", d.transition_spectral_bound}};
    return j;
}

DiscountedSolution solution_from_json(const nlohmann::json& j, MatrixField diffusion) {
    if (j.value("format", "") != "ergolab.discounted_solution")
        throw std::invalid_argument("solution file: unrecognized format");
    const auto& b = j.at("basis");
    DiscountedSolution sol;
    sol.basis = Basis(basis_family_from_string(b.at("family").get<std::string>()), b.at("dim").get<std::size_t>(),
                      b.at("degree").get<int>(), b.at("center").get<Point>(), b.at("scale").get<Point>());
    sol.alpha = j.at("alpha").get<double>();
    sol.truncation_T = j.at("truncation_T").get<double>();
    sol.lambda_alpha = j.at("lambda_alpha").get<double>();
    sol.M_psi = j.at("M_psi").get<double>();
    sol.x_ref = j.at("x_ref").get<Point>();
    sol.hull_lo = j.at("hull_lo").get<Point>();
    sol.hull_hi = j.at("hull_hi").get<Point>();
    sol.coefficients = j.at("coefficients").get<std::vector<double>>();
    sol.slice_times = j.at("slice_times").get<std::vector<double>>();
    sol.slice_coefficients = j.at("slice_coefficients").get<std::vector<std::vector<double>>>();
    if (sol.coefficients.size() != sol.basis.size())
        throw std::invalid_argument("solution file: coefficient count does not match basis " + sol.basis.id());
    if (const auto it = j.find("diagnostics"); it != j.end()) {
        auto& d = sol.diagnostics;
        d.truncation_bound = it->value("truncation_bound", 0.0);
        d.n_steps = it->value("n_steps", std::size_t{0});
        d.cloud_size = it->value("cloud_size", std::size_t{0});
        d.basis_size = it->value("basis_size", std::size_t{0});
        d.dt = it->value("dt", 0.0);
        d.max_abs_value_on_cloud = it->value("max_abs_value_on_cloud", 0.0);
        d.transition_spectral_bound = it->value("transition_spectral_bound", 0.0);
    }
    sol.diffusion = std::move(diffusion);
    return sol;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

}  // namespace ergolab
