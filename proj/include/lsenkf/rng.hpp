#ifndef LSENKF_RNG_HPP
#define LSENKF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace lsenkf {

// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Fixed seed scheme for per-particle (or per-draw) streams: every consumer of
// a (run_seed, index) pair must go through this so streams never collide.
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t index) {
    return mix_seed(run_seed + 0x9e3779b97f4a7c15ULL * (index + 1));
}

// Deterministic N(0,1) stream: mt19937_64 + Box-Muller. The standard library
// distributions have implementation-defined sequences, so they are avoided
// everywhere reproducibility matters.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    // uniform in (0,1]; the open lower end keeps log() finite
    double uniform01() {
        std::uint64_t x = eng_();
        return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lsenkf

#endif
