#pragma once

#include <cmath>
#include <string>

#include "divrank/matrix.hpp"
#include "divrank/rng.hpp"

namespace testing_util {

inline divrank::Matrix random_matrix(std::size_t rows, std::size_t cols, divrank::RngStream& rng, double scale = 1.0) {
    divrank::Matrix m(rows, cols);
    for (double& v : m.flat()) v = scale * rng.normal();
    return m;
}

inline divrank::Vec random_unit(std::size_t d, divrank::RngStream& rng) {
    divrank::Vec v(d);
    double n = 0;
    for (double& x : v) {
        x = rng.normal();
        n += x * x;
    }
    for (double& x : v) x /= std::sqrt(n);
    return v;
}

inline std::string temp_path(const std::string& name) {
    return std::string(::testing::TempDir()) + "divrank_" + name;
}

}  // namespace testing_util
