#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coarse/metric_space.hpp"

namespace fixtures {

// Integer interval [lo, hi] with labels "lo".."hi" and d(x,y) = |x-y|.
inline std::shared_ptr<const coarse::FiniteMetricSpace> line(int lo, int hi) {
    std::vector<std::string> labels;
    for (int i = lo; i <= hi; ++i) labels.push_back(std::to_string(i));
    const int n = hi - lo + 1;
    std::vector<double> dist(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            dist[static_cast<size_t>(i) * n + j] = std::abs(i - j);
    return std::make_shared<coarse::FiniteMetricSpace>(std::move(labels), std::move(dist));
}

inline std::vector<int> range_ids(int first, int last) {
    std::vector<int> out;
    for (int i = first; i <= last; ++i) out.push_back(i);
    return out;
}

}  // namespace fixtures
