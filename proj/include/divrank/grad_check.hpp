#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "divrank/params.hpp"

namespace divrank {

// Scalar objective over a parameter store. When `with_grad` is true the
// objective must accumulate d f / d θ into the store's gradients (they are
// zeroed by the caller).
using Objective = std::function<double(ParamStore&, bool with_grad)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients with central differences, coordinate by
/// coordinate: |g_ad − g_fd| / max(1, |g_ad|, |g_fd|).
GradCheckReport grad_check(const Objective& f, ParamStore& params, double h = 1e-4);

}  // namespace divrank
