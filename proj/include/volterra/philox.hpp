#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A draw is a pure function of (key, counter), so any path/step can be
// generated independently of thread layout.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace volterra {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key)
    {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

    static Key key_from_seed(std::uint64_t seed)
    {
        return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k)
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Standard normals addressed by (seed, stream, index). One Philox block
/// yields two normals via Box-Muller; normal(s, 2j) and normal(s, 2j+1)
/// share a block.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : key_(Philox4x32::key_from_seed(seed)) {}

    std::array<double, 2> pair(std::uint64_t stream, std::uint64_t block) const
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        const auto out = Philox4x32::block(ctr, key_);
        // 53-bit uniforms; u1 in (0, 1] keeps the log finite.
        const double u1 = (static_cast<double>(to53(out[0], out[1])) + 1.0) * 0x1p-53;
        const double u2 = static_cast<double>(to53(out[2], out[3])) * 0x1p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    /// Fill `out[0..n)` with the normals of `stream` starting at block `first_block`.
    template <class Out>
    void fill(std::uint64_t stream, std::uint64_t first_block, std::size_t n, Out&& out) const
    {
        for (std::size_t i = 0; i < n; i += 2) {
            const auto z = pair(stream, first_block + i / 2);
            out[i] = z[0];
            if (i + 1 < n) out[i + 1] = z[1];
        }
    }

private:
    Philox4x32::Key key_;

    static std::uint64_t to53(std::uint32_t a, std::uint32_t b)
    {
        return ((static_cast<std::uint64_t>(a) << 32) | b) >> 11;
    }
};

} // namespace volterra
