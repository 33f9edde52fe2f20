#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <cmath>
#include <random>

namespace datacom {

// Seeded random stream with hand-rolled uniform/normal draws so that the
// byte stream is identical across standard library implementations and can
// be serialized into checkpoints.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // index in [0, n)
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n == 0");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // standard normal via Box-Muller; no cached spare so the stream state is
    // exactly the engine state
    double normal() {
        double u1;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (is.fail()) throw std::runtime_error("Rng::deserialize: bad state string");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace datacom
