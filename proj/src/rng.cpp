#include "ergolab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ergolab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

// 53-bit uniform strictly inside (0,1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// The top bit of the second counter word separates uniform draws from normal draws.
constexpr std::uint32_t kUniformTag = 0x80000000u;

// Counter layout: (step, substep:15 | block:16, path_lo, path_hi).
inline Philox4x32::Counter make_counter(std::uint64_t path, std::uint64_t step, std::uint32_t substep,
                                        std::uint32_t block) {
    return {static_cast<std::uint32_t>(step), ((substep & 0x7FFFu) << 16) | (block & 0xFFFFu),
            static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
        mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name) {
    // FNV-1a over the name, then mixed with the parent seed.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : stream_name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return splitmix64(seed ^ splitmix64(h));
}

NormalSource::NormalSource(std::uint64_t seed)
    : seed_(seed),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

void NormalSource::fill(std::uint64_t path, std::uint64_t step, std::uint32_t substep,
                        std::span<double> out) const {
    const std::size_t n = out.size();
    for (std::size_t block = 0; 2 * block < n; ++block) {
        const auto r = Philox4x32::generate(
            make_counter(path, step, substep, static_cast<std::uint32_t>(block)), key_);
        const double u1 = to_open_unit(r[0], r[1]);
        const double u2 = to_open_unit(r[2], r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        out[2 * block] = rad * std::cos(ang);
        if (2 * block + 1 < n) out[2 * block + 1] = rad * std::sin(ang);
    }
}

double NormalSource::normal(std::uint64_t path, std::uint64_t step, std::uint32_t substep,
                            std::uint32_t component) const {
    const auto r = Philox4x32::generate(make_counter(path, step, substep, component / 2), key_);
    const double rad = std::sqrt(-2.0 * std::log(to_open_unit(r[0], r[1])));
    const double ang = 2.0 * std::numbers::pi * to_open_unit(r[2], r[3]);
    return component % 2 == 0 ? rad * std::cos(ang) : rad * std::sin(ang);
}

void NormalSource::fill_uniform(std::uint64_t path, std::uint64_t step, std::span<double> out) const {
    for (std::size_t block = 0; 2 * block < out.size(); ++block) {
        auto ctr = make_counter(path, step, 0, static_cast<std::uint32_t>(block));
        ctr[1] |= kUniformTag;
        const auto r = Philox4x32::generate(ctr, key_);
        out[2 * block] = to_open_unit(r[0], r[1]);
        if (2 * block + 1 < out.size()) out[2 * block + 1] = to_open_unit(r[2], r[3]);
    }
}

}  // namespace ergolab
