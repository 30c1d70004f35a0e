#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace ergolab {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// Stateless: the output is a pure function of (counter, key).
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent 64-bit seed for a named sub-stream ("forward", "bsde", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name);

/// Counter-based Gaussian source. The variate for (path, step, substep, component) never
/// depends on how many other paths or steps are drawn, so batches can be simulated in any
/// order and path counts can change without reshuffling existing paths.
class NormalSource {
  public:
    explicit NormalSource(std::uint64_t seed);

    /// Fills out[c] with the standard normals for components c = 0..out.size()-1.
    void fill(std::uint64_t path, std::uint64_t step, std::uint32_t substep, std::span<double> out) const;

    double normal(std::uint64_t path, std::uint64_t step, std::uint32_t substep = 0,
                  std::uint32_t component = 0) const;

    /// Uniform variates on (0,1) from the same counter layout, disjoint from the normals.
    void fill_uniform(std::uint64_t path, std::uint64_t step, std::span<double> out) const;

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    Philox4x32::Key key_;
};

}  // namespace ergolab
