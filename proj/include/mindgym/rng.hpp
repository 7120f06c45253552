#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mindgym {

// 64-bit FNV-1a, used for seed derivation and mock request hashing.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Splittable seeded RNG: one recorded root seed, module-level seeds derived
// by label so every consumer's stream is reproducible and logged.
class RootRng {
public:
    explicit RootRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t derive(std::string_view label) const {
        std::uint64_t s = fnv1a64(label, seed_ ^ 0x6d696e6467796dull);
        return splitmix64(s);
    }

    std::uint64_t derive(std::string_view label, std::uint64_t index) const {
        std::uint64_t s = derive(label) ^ (index * 0x9e3779b97f4a7c15ull);
        return splitmix64(s);
    }

    std::mt19937_64 engine(std::string_view label) const {
        return std::mt19937_64(derive(label));
    }

    std::mt19937_64 engine(std::string_view label, std::uint64_t index) const {
        return std::mt19937_64(derive(label, index));
    }

private:
    std::uint64_t seed_;
};

}  // namespace mindgym
