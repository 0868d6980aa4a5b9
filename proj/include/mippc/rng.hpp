#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mippc/errors.hpp"

namespace mippc {

namespace detail {
// splitmix64 finalizer; used only to turn (seed, stream) keys into engine state.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// A splittable random stream.  Every stream is identified by (seed, stream id);
// the stream id is a hash chain, so split(k) derives an independent child
// stream deterministically: child id = mix64(id ^ mix64(k)).  Identical
// (seed, stream id) always reproduce the identical draw sequence.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream),
          engine_(detail::mix64(detail::mix64(seed) ^ detail::mix64(stream))) {}

    RngStream split(std::uint64_t key) const {
        return RngStream(seed_, detail::mix64(stream_ ^ detail::mix64(key)));
    }

    // A plain 64-bit value derived from (seed, stream, key); handy when a
    // sub-component wants its own seed rather than a live stream.
    std::uint64_t derive_seed(std::uint64_t key) const {
        return detail::mix64(detail::mix64(seed_ ^ detail::mix64(stream_)) ^ detail::mix64(key));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method with one cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Marsaglia-Tsang; unit scale.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw NumericError("gamma draw requires shape > 0");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u <= 0.0 ? 5e-324 : u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

    bool bernoulli(double p) { return uniform() < p; }

    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw NumericError("uniform_index over empty range");
        auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k >= n ? n - 1 : k;
    }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mippc
