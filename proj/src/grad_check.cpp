#include "divrank/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "divrank/error.hpp"

namespace divrank {

GradCheckReport grad_check(const Objective& f, ParamStore& params, double h) {
    params.zero_grad();
    const double f0 = f(params, true);
    if (!std::isfinite(f0)) throw DivergenceError("grad_check: objective is not finite at theta");

    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params.params()) analytic.push_back(p.grad);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params.params()[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double& w = p.value.flat()[i];
            const double saved = w;
            w = saved + h;
            const double fp = f(params, false);
            w = saved - h;
            const double fm = f(params, false);
            w = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic[pi].flat()[i]))
                throw DivergenceError("grad_check: non-finite value while perturbing '" + p.name + "'[" +
                                      std::to_string(i) + "]");
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = analytic[pi].flat()[i];
            const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
            ++report.coordinates;
            if (rel > report.max_rel_error || report.worst_param.empty()) {
                report.max_rel_error = std::max(report.max_rel_error, rel);
                if (rel >= report.max_rel_error) {
                    report.worst_param = p.name;
                    report.worst_index = i;
                }
            }
        }
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) params.params()[pi].grad = analytic[pi];
    return report;
}

}  // namespace divrank
