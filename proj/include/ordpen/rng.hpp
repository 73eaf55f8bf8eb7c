#pragma once

// Portable seeded random streams. The standard <random> distributions are
// implementation-defined, so the few draws we need are written out here to
// keep datasets, folds and subsamples bit-identical across toolchains.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace ordpen {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for the `index`-th task under a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer on [0, bound), bound > 0. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t r = next();
        while (r >= limit)
            r = next();
        return r % bound;
    }

    // Uniform integer on [lo, hi].
    int between(int lo, int hi)
    {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Draw an index from a discrete distribution given by nonnegative weights summing to ~1.
    std::size_t categorical(std::span<const double> probs)
    {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t r = 0; r + 1 < probs.size(); ++r) {
            acc += probs[r];
            if (u < acc)
                return r;
        }
        return probs.size() - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n)
    {
        std::vector<std::size_t> v(n);
        std::iota(v.begin(), v.end(), std::size_t{0});
        shuffle(v);
        return v;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace ordpen
