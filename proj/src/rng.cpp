#include "pvedge/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace pvedge {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

Philox4x32::Block Philox4x32::operator()(const Block& ctr) const noexcept {
    Block c = ctr;
    std::uint32_t k0 = key_[0];
    std::uint32_t k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return c;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t r) noexcept {
    return splitmix64(splitmix64(master) ^ (r * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
}

double normal_quantile(double u) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double normal_pdf(double x) noexcept {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double NormalStream::operator()(std::uint64_t index) noexcept {
    const std::uint64_t ctr = index >> 1;
    if (ctr != cached_ctr_) {
        cached_ = gen_.block(ctr, stream_);
        cached_ctr_ = ctr;
    }
    const int half = static_cast<int>(index & 1u) * 2;
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(cached_[half + 1]) << 32) | cached_[half];
    return normal_quantile(bits_to_open_unit(bits));
}

std::uint64_t SequentialRng::next64() noexcept {
    if (used_ == 2) {
        buf_ = gen_.block(ctr_++, stream_);
        used_ = 0;
    }
    const int half = used_++ * 2;
    return (static_cast<std::uint64_t>(buf_[half + 1]) << 32) | buf_[half];
}

double SequentialRng::uniform() noexcept { return bits_to_open_unit(next64()); }

double SequentialRng::normal() { return normal_quantile(uniform()); }

std::uint64_t SequentialRng::below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift; bias is below 2^-64 * bound and irrelevant here.
    const unsigned __int128 prod = static_cast<unsigned __int128>(next64()) * bound;
    return static_cast<std::uint64_t>(prod >> 64);
}

}  // namespace pvedge
