#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergolab/bsde.hpp"

namespace ergolab {

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double v);

/// Column-oriented CSV writer; numbers go through format_double so output is byte-stable.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(const std::vector<double>& row);
    void add_row(const std::vector<std::string>& row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

  private:
    std::vector<std::string> header_;
    std::string body_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Self-describing serialization: basis id and parameters, alpha, truncation horizon and the
/// stored coefficient slices. The diffusion is not serialized; solution_from_json takes it back.
nlohmann::json solution_to_json(const DiscountedSolution& sol);
DiscountedSolution solution_from_json(const nlohmann::json& j, MatrixField diffusion);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace ergolab
