#pragma once

#include <array>
#include <cstdint>

namespace pvedge {

/// Philox4x32-10 counter-based generator (Salmon et al. 2011).
/// Stateless apart from the key: block(ctr) is a pure function of (key, ctr).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}
    Philox4x32(std::uint32_t k0, std::uint32_t k1) noexcept : key_{k0, k1} {}

    Block operator()(const Block& ctr) const noexcept;

    /// Block for a 128-bit counter given as two 64-bit halves.
    Block block(std::uint64_t lo, std::uint64_t hi = 0) const noexcept {
        return (*this)({static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32),
                        static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32)});
    }

private:
    std::array<std::uint32_t, 2> key_;
};

/// 64-bit finalizer of SplitMix64; used to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Substream seed for replication r of a run with the given master seed.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t r) noexcept;

/// Map 64 random bits to the open interval (0, 1) with 53-bit resolution.
inline double bits_to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal quantile function.
double normal_quantile(double u);

/// Standard normal density and distribution function.
double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;

/// Stream of standard normals addressed by an integer index, via inverse CDF.
/// Two consecutive indices share one Philox block.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : gen_(seed), stream_(stream) {}

    double operator()(std::uint64_t index) noexcept;

private:
    Philox4x32 gen_;
    std::uint64_t stream_;
    std::uint64_t cached_ctr_ = ~std::uint64_t{0};
    Philox4x32::Block cached_{};
};

/// Sequential uniform/normal draws from a Philox stream; used where
/// random access is not needed (bootstrap, oracle sampling).
class SequentialRng {
public:
    explicit SequentialRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : gen_(seed), stream_(stream) {}

    double uniform() noexcept;
    double normal();
    std::uint64_t below(std::uint64_t bound) noexcept;

private:
    std::uint64_t next64() noexcept;

    Philox4x32 gen_;
    std::uint64_t stream_;
    std::uint64_t ctr_ = 0;
    Philox4x32::Block buf_{};
    int used_ = 2;
};

}  // namespace pvedge
