#include <cmath>
#include <deque>

#include "divrank/error.hpp"
#include "divrank/retrieval.hpp"

namespace divrank {

namespace {

std::vector<std::size_t> region_query(const Matrix& pts, std::size_t i, double eps2) {
    std::vector<std::size_t> out;
    auto pi = pts.row(i);
    for (std::size_t j = 0; j < pts.rows(); ++j) {
        auto pj = pts.row(j);
        double s = 0.0;
        for (std::size_t c = 0; c < pi.size(); ++c) {
            const double t = pi[c] - pj[c];
            s += t * t;
        }
        if (s <= eps2) out.push_back(j);
    }
    return out;
}

}  // namespace

std::vector<int> dbscan(const Matrix& points, double eps, int min_pts) {
    require(eps > 0.0, "dbscan: eps must be > 0");
    require(min_pts >= 1, "dbscan: min_pts must be >= 1");
    constexpr int kUnvisited = -2;
    const std::size_t n = points.rows();
    const double eps2 = eps * eps;
    const auto need = static_cast<std::size_t>(min_pts);
    std::vector<int> label(n, kUnvisited);
    int cluster = 0;

    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        const auto seeds = region_query(points, i, eps2);
        if (seeds.size() < need) {
            label[i] = kNoise;
            continue;
        }
        label[i] = cluster;
        std::deque<std::size_t> frontier(seeds.begin(), seeds.end());
        while (!frontier.empty()) {
            const std::size_t j = frontier.front();
            frontier.pop_front();
            if (label[j] == kNoise) label[j] = cluster;  // border point
            if (label[j] != kUnvisited) continue;
            label[j] = cluster;
            const auto nb = region_query(points, j, eps2);
            if (nb.size() >= need) frontier.insert(frontier.end(), nb.begin(), nb.end());
        }
        ++cluster;
    }
    return label;
}

}  // namespace divrank
