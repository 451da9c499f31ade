#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace divrank {

/// Seeded random stream keyed by (seed, label). Distinct labels give
/// independent streams, so adding draws to one component never shifts the
/// values another component sees. All samplers are implemented here rather
/// than through <random> distributions, whose output is library-specific.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label);

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& label() const noexcept { return label_; }

    std::uint64_t next_u64() { return engine_(); }
    double uniform();  // [0, 1)
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t uniform_index(std::size_t n);  // [0, n)
    int poisson(double mean);

    // Child stream derived from this stream's seed and label.
    RngStream split(std::string_view sublabel) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(i)]);
    }

private:
    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace divrank
