#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace arsp {

// Deterministic RNG. mt19937_64 plus explicit value mappings so that streams
// are bit-identical across platforms and standard library versions
// (std::*_distribution output is implementation-defined and must never feed
// anything we persist or assert on).
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
    }

    // Box-Muller, second value cached.
    double gaussian();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// FNV-1a over raw bytes; used for checkpoint and image hashes.
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a64(const std::vector<double>& v, uint64_t h = 1469598103934665603ull);

// Stable decimal formatting for CSV output (%.10g).
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace arsp
