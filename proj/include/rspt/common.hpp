#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace rspt {

using Scalar = double;
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
using Vec2i = Eigen::Vector2i;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr Scalar kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// Normalize an angle into (-pi, pi].
template <typename T>
T normalize_angle(T a) {
    a = std::fmod(a + T(kPi), T(2 * kPi));
    if (a <= T(0)) a += T(2 * kPi);
    return a - T(kPi);
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derive an independent seed for a named sub-stream.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return splitmix64(base + 0x9E3779B97F4A7C15ull * (stream + 1));
}

/// Deterministic random stream. All distribution conversions are hand-rolled
/// so sequences depend only on the seed, not on the standard library build.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    Scalar uniform() {
        return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
    }

    Scalar uniform(Scalar a, Scalar b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(uniform() * static_cast<Scalar>(n));
    }

    /// Standard normal via Box-Muller.
    Scalar normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        Scalar u1 = Scalar(1) - uniform();  // (0, 1]
        Scalar u2 = uniform();
        Scalar r = std::sqrt(Scalar(-2) * std::log(u1));
        spare_ = r * std::sin(2 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2 * kPi * u2);
    }

    Scalar normal(Scalar mean, Scalar stddev) { return mean + stddev * normal(); }

    /// Independent stream for a named purpose.
    RandomStream split(uint64_t stream) const {
        return RandomStream(derive_seed(seed_, stream));
    }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    Scalar spare_ = 0;
};

}  // namespace rspt
