#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace volterra {

// Neumaier's variant of Kahan summation. Result depends only on the order
// of add() calls.
class CompensatedSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Pairwise (cascade) summation with a fixed split, so the result is a pure
/// function of the input sequence.
inline double pairwise_sum(std::span<const double> xs)
{
    constexpr std::size_t leaf = 16;
    if (xs.size() <= leaf) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct SampleStats {
    double mean = 0.0;
    double stddev = 0.0;
    double stderr_mean = 0.0;
    std::size_t n = 0;
};

/// Two-pass mean / sample standard deviation with pairwise reductions.
inline SampleStats sample_stats(std::span<const double> xs)
{
    SampleStats st;
    st.n = xs.size();
    if (st.n == 0) return st;
    st.mean = pairwise_sum(xs) / static_cast<double>(st.n);
    if (st.n < 2) return st;
    // Squared deviations go through the same pairwise tree.
    constexpr std::size_t leaf = 16;
    auto dev = [&](auto&& self, std::span<const double> part) -> double {
        if (part.size() <= leaf) {
            double s = 0.0;
            for (double x : part) s += (x - st.mean) * (x - st.mean);
            return s;
        }
        const std::size_t half = part.size() / 2;
        return self(self, part.first(half)) + self(self, part.subspan(half));
    };
    const double ss = dev(dev, xs);
    st.stddev = std::sqrt(ss / static_cast<double>(st.n - 1));
    st.stderr_mean = st.stddev / std::sqrt(static_cast<double>(st.n));
    return st;
}

} // namespace volterra
